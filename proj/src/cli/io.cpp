#include "lipgate/io.hpp"

#include "lipgate/error.hpp"

#include <zlib.h>

#include <bit>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

namespace lipgate {

namespace {

constexpr char kCheckpointMagic[4] = {'L', 'I', 'P', 'G'};
constexpr char kDatasetMagic[4] = {'L', 'I', 'P', 'D'};
constexpr char kTensorMagic[4] = {'L', 'I', 'P', 'T'};

// Refuse absurd sizes from corrupted headers before allocating.
constexpr std::uint64_t kMaxElements = std::uint64_t{1} << 32;

class Writer {
 public:
  void magic(const char (&m)[4]) { bytes_.insert(bytes_.end(), m, m + 4); }
  void u8(std::uint8_t v) { bytes_.push_back(v); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) bytes_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void raw(const std::string& s) { bytes_.insert(bytes_.end(), s.begin(), s.end()); }

  void tensor(const std::string& name, const std::vector<std::size_t>& shape,
              const std::vector<double>& data) {
    u32(static_cast<std::uint32_t>(name.size()));
    raw(name);
    u32(static_cast<std::uint32_t>(shape.size()));
    for (auto d : shape) u64(d);
    for (double v : data) f64(v);
  }

  Bytes finish() {
    const std::uint32_t c = crc32(bytes_.data(), bytes_.size());
    u32(c);
    return std::move(bytes_);
  }

 private:
  Bytes bytes_;
};

class Reader {
 public:
  // Verifies the trailing CRC and the magic; leaves the cursor after the magic.
  Reader(const Bytes& bytes, const char (&m)[4], const char* what) : bytes_(bytes), what_(what) {
    if (bytes.size() < 8) throw FormatError(std::string(what) + ": file too short");
    end_ = bytes.size() - 4;
    std::uint32_t stored = 0;
    for (int i = 0; i < 4; ++i) stored |= std::uint32_t{bytes[end_ + i]} << (8 * i);
    const std::uint32_t actual = crc32(bytes.data(), end_);
    if (stored != actual) throw CrcMismatchError(std::string(what) + ": CRC-32 mismatch, file is corrupted");
    if (std::memcmp(bytes.data(), m, 4) != 0) throw FormatError(std::string(what) + ": bad magic");
    pos_ = 4;
  }

  void need(std::size_t count) const {
    if (count > end_ - pos_) throw FormatError(std::string(what_) + ": truncated record");
  }
  std::uint8_t u8() {
    need(1);
    return bytes_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= std::uint64_t{bytes_[pos_++]} << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string raw(std::size_t count) {
    need(count);
    std::string s(reinterpret_cast<const char*>(bytes_.data() + pos_), count);
    pos_ += count;
    return s;
  }

  Tensor tensor() {
    Tensor t;
    t.name = raw(u32());
    const std::uint32_t rank = u32();
    if (rank > 8) throw FormatError(std::string(what_) + ": tensor rank " + std::to_string(rank));
    std::uint64_t count = 1;
    for (std::uint32_t i = 0; i < rank; ++i) {
      const std::uint64_t d = u64();
      if (d > kMaxElements || count * d > kMaxElements)
        throw FormatError(std::string(what_) + ": tensor too large");
      count *= d;
      t.shape.push_back(static_cast<std::size_t>(d));
    }
    need(count * 8);
    t.data.resize(count);
    for (auto& v : t.data) v = f64();
    return t;
  }

  void version(std::uint32_t expected) {
    const std::uint32_t v = u32();
    if (v != expected)
      throw VersionMismatchError(std::string(what_) + ": format version " + std::to_string(v) +
                                 ", expected " + std::to_string(expected));
  }

  void finish() const {
    if (pos_ != end_) throw FormatError(std::string(what_) + ": trailing bytes");
  }

 private:
  const Bytes& bytes_;
  const char* what_;
  std::size_t pos_ = 0;
  std::size_t end_ = 0;
};

std::vector<std::string> split(const std::string& line, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(line);
  while (std::getline(in, cur, sep)) out.push_back(cur);
  if (!line.empty() && line.back() == sep) out.emplace_back();
  return out;
}

template <class T>
T parse_field(const std::string& text, std::size_t line) {
  T v{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw FormatError("CSV line " + std::to_string(line) + ": cannot parse '" + text + "'");
  return v;
}

}  // namespace

std::uint32_t crc32(const std::uint8_t* data, std::size_t size) {
  uLong c = ::crc32(0L, Z_NULL, 0);
  while (size > 0) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(size, 1u << 30));
    c = ::crc32(c, data, chunk);
    data += chunk;
    size -= chunk;
  }
  return static_cast<std::uint32_t>(c);
}

Bytes read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open '" + path + "'");
  Bytes bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for '" + path + "'");
  return bytes;
}

void write_file(const std::string& path, const Bytes& bytes) {
  namespace fs = std::filesystem;
  const fs::path target(path);
  if (target.has_parent_path()) {
    std::error_code ec;
    fs::create_directories(target.parent_path(), ec);
  }
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write '" + path + "'");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for '" + path + "'");
  }
  std::error_code ec;
  fs::rename(tmp, target, ec);
  if (ec) throw IoError("cannot move '" + tmp + "' to '" + path + "': " + ec.message());
}

void save_text(const std::string& path, const std::string& text) {
  write_file(path, Bytes(text.begin(), text.end()));
}

Bytes encode_checkpoint(const Checkpoint& ckpt) {
  if (!(ckpt.model.spec == ckpt.config.arch))
    throw InvalidArgument("checkpoint: model spec differs from the config's [arch]");
  if (ckpt.model.rng_seed != ckpt.config.seed)
    throw InvalidArgument("checkpoint: model init seed differs from the config seed");
  ckpt.model.validate();
  Writer w;
  w.magic(kCheckpointMagic);
  w.u32(kCheckpointVersion);
  const std::string blob = ckpt.config.to_ini();
  w.u32(static_cast<std::uint32_t>(blob.size()));
  w.raw(blob);
  w.u32(static_cast<std::uint32_t>(ckpt.model.weights.size()));
  for (const auto& t : ckpt.model.weights) w.tensor(t.name, t.shape, t.data);
  return w.finish();
}

Checkpoint decode_checkpoint(const Bytes& bytes) {
  Reader r(bytes, kCheckpointMagic, "checkpoint");
  r.version(kCheckpointVersion);
  Checkpoint ckpt;
  ckpt.config = parse_config(r.raw(r.u32()));
  ckpt.model.spec = ckpt.config.arch;
  ckpt.model.rng_seed = ckpt.config.seed;
  const std::uint32_t count = r.u32();
  const auto layout = ckpt.model.spec.layout();
  if (count != layout.size())
    throw FormatError("checkpoint: " + std::to_string(count) + " tensors, architecture declares " +
                      std::to_string(layout.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    Tensor t = r.tensor();
    if (t.name != layout[i].name || t.shape != layout[i].shape)
      throw FormatError("checkpoint: tensor " + std::to_string(i) + " is '" + t.name +
                        "', expected '" + layout[i].name + "' with the declared shape");
    ckpt.model.weights.push_back(std::move(t));
  }
  r.finish();
  try {
    ckpt.model.validate();
  } catch (const Error& e) {
    throw FormatError(std::string("checkpoint: ") + e.what());
  }
  return ckpt;
}

void save_checkpoint(const std::string& path, const Checkpoint& ckpt) {
  write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::string& path) { return decode_checkpoint(read_file(path)); }

bool Dataset::operator==(const Dataset& o) const {
  if (task != o.task || family != o.family || n != o.n || samples.size() != o.samples.size())
    return false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& a = samples[i];
    const auto& b = o.samples[i];
    if (a.input.values != b.input.values || a.input.encoding != b.input.encoding ||
        a.input.n != b.input.n || !(a.target == b.target) ||
        a.meta.phantom_seed != b.meta.phantom_seed || a.meta.noise_seed != b.meta.noise_seed ||
        a.meta.task != b.meta.task || a.meta.family != b.meta.family ||
        a.meta.augmented != b.meta.augmented)
      return false;
  }
  return true;
}

Bytes encode_dataset(const Dataset& ds) {
  validate_side(ds.n);
  const std::size_t in_width = ds.task == Task::Automap ? 2 * ds.n * ds.n : ds.n * ds.n;
  Writer w;
  w.magic(kDatasetMagic);
  w.u32(kDatasetVersion);
  w.u32(static_cast<std::uint32_t>(ds.task));
  w.u32(static_cast<std::uint32_t>(ds.family));
  w.u32(static_cast<std::uint32_t>(ds.n));
  w.u64(ds.samples.size());
  for (const auto& s : ds.samples) {
    if (s.input.values.size() != in_width || s.target.n != ds.n)
      throw ShapeError("dataset: sample does not match the header's task and side");
    w.u64(s.meta.phantom_seed);
    w.u64(s.meta.noise_seed);
    w.u8(s.meta.augmented ? 1 : 0);
    w.tensor("input", {in_width}, s.input.values);
    w.tensor("target", {ds.n, ds.n}, s.target.pixels);
  }
  return w.finish();
}

Dataset decode_dataset(const Bytes& bytes) {
  Reader r(bytes, kDatasetMagic, "dataset");
  r.version(kDatasetVersion);
  Dataset ds;
  const std::uint32_t task = r.u32();
  const std::uint32_t family = r.u32();
  if (task > 2 || family > 1) throw FormatError("dataset: unknown task or family code");
  ds.task = static_cast<Task>(task);
  ds.family = static_cast<PhantomFamily>(family);
  ds.n = r.u32();
  try {
    validate_side(ds.n);
  } catch (const Error& e) {
    throw FormatError(std::string("dataset: ") + e.what());
  }
  const std::uint64_t count = r.u64();
  const std::size_t in_width = ds.task == Task::Automap ? 2 * ds.n * ds.n : ds.n * ds.n;
  for (std::uint64_t i = 0; i < count; ++i) {
    SamplePair s;
    s.meta.phantom_seed = r.u64();
    s.meta.noise_seed = r.u64();
    const std::uint8_t aug = r.u8();
    if (aug > 1) throw FormatError("dataset: bad augmentation flag");
    s.meta.augmented = aug == 1;
    s.meta.task = ds.task;
    s.meta.family = ds.family;
    Tensor in = r.tensor();
    Tensor tg = r.tensor();
    if (in.name != "input" || in.shape != std::vector<std::size_t>{in_width} || tg.name != "target" ||
        tg.shape != std::vector<std::size_t>{ds.n, ds.n})
      throw FormatError("dataset: sample " + std::to_string(i) + " has unexpected tensor records");
    s.input.values = std::move(in.data);
    s.input.encoding = encoding_for(ds.task);
    s.input.n = ds.n;
    s.target = Image(ds.n, std::move(tg.data));
    ds.samples.push_back(std::move(s));
  }
  r.finish();
  return ds;
}

void save_dataset(const std::string& path, const Dataset& ds) { write_file(path, encode_dataset(ds)); }

Dataset load_dataset(const std::string& path) { return decode_dataset(read_file(path)); }

Bytes encode_tensor(const Tensor& t) {
  std::size_t count = 1;
  for (auto d : t.shape) count *= d;
  if (count != t.data.size()) throw ShapeError("tensor '" + t.name + "': shape and data disagree");
  Writer w;
  w.magic(kTensorMagic);
  w.u32(kTensorFileVersion);
  w.tensor(t.name, t.shape, t.data);
  return w.finish();
}

Tensor decode_tensor(const Bytes& bytes) {
  Reader r(bytes, kTensorMagic, "tensor file");
  r.version(kTensorFileVersion);
  Tensor t = r.tensor();
  r.finish();
  return t;
}

void save_tensor(const std::string& path, const Tensor& t) { write_file(path, encode_tensor(t)); }

Tensor load_tensor(const std::string& path) { return decode_tensor(read_file(path)); }

void save_image(const std::string& path, const Image& img, const std::string& name) {
  save_tensor(path, Tensor{name, {img.n, img.n}, img.pixels});
}

Image load_image(const std::string& path) {
  Tensor t = load_tensor(path);
  if (t.shape.size() != 2 || t.shape[0] != t.shape[1])
    throw FormatError("'" + path + "' does not hold a square image");
  return Image(t.shape[0], std::move(t.data));
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string records_to_csv(const std::vector<EvalRecord>& records) {
  std::string out = "sample_id,label,mae,lipschitz,variance\n";
  for (const auto& r : records) {
    out += std::to_string(r.sample_id);
    out += ',';
    out += to_string(r.label);
    out += ',' + format_double(r.mae) + ',' + format_double(r.lipschitz) + ',' +
           format_double(r.variance) + '\n';
  }
  return out;
}

std::vector<EvalRecord> records_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,label,mae,lipschitz,variance")
    throw FormatError("records CSV: missing or unexpected header");
  std::vector<EvalRecord> out;
  std::set<std::uint64_t> seen;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 5) throw FormatError("records CSV line " + std::to_string(lineno) + ": expected 5 fields");
    EvalRecord r;
    r.sample_id = parse_field<std::uint64_t>(f[0], lineno);
    r.label = parse_label(f[1]);
    r.mae = parse_field<double>(f[2], lineno);
    r.lipschitz = parse_field<double>(f[3], lineno);
    r.variance = parse_field<double>(f[4], lineno);
    if (!std::isfinite(r.mae) || !std::isfinite(r.lipschitz) || !std::isfinite(r.variance))
      throw FormatError("records CSV line " + std::to_string(lineno) + ": non-finite value");
    if (!seen.insert(r.sample_id).second)
      throw FormatError("records CSV: duplicate sample_id " + std::to_string(r.sample_id));
    out.push_back(r);
  }
  return out;
}

void save_records(const std::string& path, const std::vector<EvalRecord>& records) {
  save_text(path, records_to_csv(records));
}

std::vector<EvalRecord> load_records(const std::string& path) {
  const Bytes b = read_file(path);
  return records_from_csv(std::string(b.begin(), b.end()));
}

std::string roc_to_csv(const RocCurve& curve) {
  std::string out = "fpr,tpr\n";
  for (const auto& p : curve.points) out += format_double(p.fpr) + ',' + format_double(p.tpr) + '\n';
  return out;
}

std::string referral_to_csv(const ReferralCurve& curve) {
  std::string out = "fraction,mean_lip,mean_mae\n";
  for (std::size_t i = 0; i < curve.fractions.size(); ++i)
    out += format_double(curve.fractions[i]) + ',' + format_double(curve.mean_lip[i]) + ',' +
           format_double(curve.mean_mae[i]) + '\n';
  return out;
}

std::string loss_history_to_csv(const std::vector<EpochStats>& history) {
  std::string out = "epoch,mean_total_loss,mean_data_loss\n";
  for (const auto& e : history)
    out += std::to_string(e.epoch) + ',' + format_double(e.mean_total_loss) + ',' +
           format_double(e.mean_data_loss) + '\n';
  return out;
}

}  // namespace lipgate
