#pragma once

// Persistence: binary containers for checkpoints ("LIPG"), datasets ("LIPD")
// and single tensors/images ("LIPT"), plus the CSV schemas for evaluation
// records and plot-ready curves. All integers and doubles are little-endian;
// every binary file ends with a CRC-32 of the preceding bytes.

#include "lipgate/config.hpp"
#include "lipgate/datagen.hpp"
#include "lipgate/metrics.hpp"
#include "lipgate/models.hpp"

#include <cstdint>
#include <string>
#include <vector>

namespace lipgate {

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kDatasetVersion = 1;
inline constexpr std::uint32_t kTensorFileVersion = 1;

using Bytes = std::vector<std::uint8_t>;

Bytes read_file(const std::string& path);
/// Writes via a temporary file and rename.
void write_file(const std::string& path, const Bytes& bytes);

std::uint32_t crc32(const std::uint8_t* data, std::size_t size);

struct Checkpoint {
  RunConfig config;
  ReconModel model;
};

/// The config blob is config.to_ini(); the model's spec and init seed must
/// match it.
Bytes encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const Bytes& bytes);
void save_checkpoint(const std::string& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::string& path);

struct Dataset {
  Task task = Task::Automap;
  PhantomFamily family = PhantomFamily::IdEllipse;
  std::size_t n = 0;
  std::vector<SamplePair> samples;

  bool operator==(const Dataset& other) const;
};

Bytes encode_dataset(const Dataset& ds);
Dataset decode_dataset(const Bytes& bytes);
void save_dataset(const std::string& path, const Dataset& ds);
Dataset load_dataset(const std::string& path);

Bytes encode_tensor(const Tensor& t);
Tensor decode_tensor(const Bytes& bytes);
void save_tensor(const std::string& path, const Tensor& t);
Tensor load_tensor(const std::string& path);

/// n x n image stored as a rank-2 tensor.
void save_image(const std::string& path, const Image& img, const std::string& name = "image");
Image load_image(const std::string& path);

/// Doubles are written with 17 significant digits so parsing restores them bit-exactly.
std::string format_double(double v);

std::string records_to_csv(const std::vector<EvalRecord>& records);
std::vector<EvalRecord> records_from_csv(const std::string& text);
void save_records(const std::string& path, const std::vector<EvalRecord>& records);
std::vector<EvalRecord> load_records(const std::string& path);

std::string roc_to_csv(const RocCurve& curve);
std::string referral_to_csv(const ReferralCurve& curve);
std::string loss_history_to_csv(const std::vector<EpochStats>& history);
void save_text(const std::string& path, const std::string& text);

}  // namespace lipgate
