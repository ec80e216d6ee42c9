#include "mrsnn/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <numbers>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "mrsnn/coverage.hpp"
#include "mrsnn/rng.hpp"

namespace mrsnn {

namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> read_bytes(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_bytes(const fs::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ConfigError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ConfigError("short write to " + path.string());
}

std::uint32_t be32(std::span<const std::uint8_t> b, std::size_t off) {
  return (std::uint32_t{b[off]} << 24) | (std::uint32_t{b[off + 1]} << 16) |
         (std::uint32_t{b[off + 2]} << 8) | std::uint32_t{b[off + 3]};
}

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t off) {
  return std::uint32_t{b[off]} | (std::uint32_t{b[off + 1]} << 8) |
         (std::uint32_t{b[off + 2]} << 16) | (std::uint32_t{b[off + 3]} << 24);
}

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t off) {
  return static_cast<std::uint16_t>(b[off] | (b[off + 1] << 8));
}

void put_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 24; s >= 0; s -= 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_le32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<std::uint8_t>(v >> s));
}

void put_le16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) { out.insert(out.end(), tag, tag + 4); }

// Little-endian writer used for the dataset container.
struct Writer {
  std::vector<std::uint8_t> buf;
  void u32(std::uint32_t v) { put_le32(buf, v); }
  void i32(std::int32_t v) { put_le32(buf, static_cast<std::uint32_t>(v)); }
  void str(const std::string& s) {
    u32(static_cast<std::uint32_t>(s.size()));
    buf.insert(buf.end(), s.begin(), s.end());
  }
  void floats(const std::vector<float>& v) {
    u32(static_cast<std::uint32_t>(v.size()));
    for (float f : v) {
      std::uint32_t bits;
      std::memcpy(&bits, &f, 4);
      u32(bits);
    }
  }
};

struct Reader {
  std::span<const std::uint8_t> b;
  std::size_t off = 0;
  void need(std::size_t n) const {
    if (off + n > b.size()) {
      throw ParseError("dataset: truncated at byte offset " + std::to_string(off));
    }
  }
  std::uint32_t u32() {
    need(4);
    const auto v = le32(b, off);
    off += 4;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  std::string str() {
    const auto n = u32();
    need(n);
    std::string s(reinterpret_cast<const char*>(b.data() + off), n);
    off += n;
    return s;
  }
  std::vector<float> floats() {
    const auto n = u32();
    need(static_cast<std::size_t>(n) * 4);
    std::vector<float> v(n);
    for (auto& f : v) {
      const auto bits = le32(b, off);
      std::memcpy(&f, &bits, 4);
      off += 4;
    }
    return v;
  }
};

constexpr char kDatasetMagic[8] = {'M', 'R', 'S', 'N', 'N', 'D', 'S', '1'};

std::vector<std::uint8_t> serialize_dataset(const Dataset& ds) {
  Writer w;
  w.buf.insert(w.buf.end(), kDatasetMagic, kDatasetMagic + 8);
  w.str(std::string(to_string(ds.modality)));
  w.i32(ds.sample_rate);
  w.i32(ds.height);
  w.i32(ds.width);
  w.str(ds.source);
  for (const auto* part : {&ds.train, &ds.test}) {
    w.u32(static_cast<std::uint32_t>(part->size()));
    for (const auto& s : *part) {
      w.i32(s.label);
      w.i32(s.group);
      w.floats(s.data);
    }
  }
  return std::move(w.buf);
}

void check_label(int label, const std::string& where) {
  if (label < 0 || label >= kNumClasses) {
    throw ParseError(where + ": label " + std::to_string(label) + " outside [0,9]");
  }
}

}  // namespace

// ---- Dataset ------------------------------------------------------------------

std::string Dataset::checksum() const { return sha256_hex(serialize_dataset(*this)); }

void save_dataset(const fs::path& path, const Dataset& ds) { write_bytes(path, serialize_dataset(ds)); }

Dataset load_dataset(const fs::path& path) {
  const auto bytes = read_bytes(path);
  if (bytes.size() < 8 || std::memcmp(bytes.data(), kDatasetMagic, 8) != 0) {
    throw ParseError("dataset: bad magic in " + path.string());
  }
  Reader r{bytes, 8};
  Dataset ds;
  ds.modality = modality_from_string(r.str());
  ds.sample_rate = r.i32();
  ds.height = r.i32();
  ds.width = r.i32();
  ds.source = r.str();
  for (auto* part : {&ds.train, &ds.test}) {
    const auto n = r.u32();
    part->resize(n);
    for (auto& s : *part) {
      s.label = r.i32();
      check_label(s.label, "dataset");
      s.group = r.i32();
      s.data = r.floats();
    }
  }
  if (r.off != bytes.size()) {
    throw ParseError("dataset: trailing bytes at offset " + std::to_string(r.off));
  }
  return ds;
}

// ---- checksums ------------------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw Error("sha256: digest failed");
  }
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) {
    os << std::hex << std::setw(2) << std::setfill('0') << static_cast<int>(md[i]);
  }
  return os.str();
}

std::string sha256_file(const fs::path& path) { return sha256_hex(read_bytes(path)); }

Manifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("missing checksum manifest " + path.string());
  Manifest m;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto sp = line.find(' ');
    if (sp != 64 || line.size() < 67 || line[65] != ' ') {
      throw ParseError("manifest " + path.string() + ": malformed line " + std::to_string(lineno));
    }
    m[line.substr(66)] = line.substr(0, 64);
  }
  return m;
}

void write_manifest(const fs::path& path, const Manifest& m) {
  std::ostringstream os;
  for (const auto& [rel, hex] : m) os << hex << "  " << rel << '\n';
  const auto s = os.str();
  write_bytes(path, {reinterpret_cast<const std::uint8_t*>(s.data()), s.size()});
}

void verify_file(const Manifest& m, const fs::path& dir, const std::string& relpath) {
  const auto it = m.find(relpath);
  if (it == m.end()) throw ParseError("manifest has no entry for " + relpath);
  const auto got = sha256_file(dir / relpath);
  if (got != it->second) {
    throw ParseError("checksum mismatch for " + relpath + ": expected " + it->second + ", got " + got);
  }
}

Manifest build_manifest(const fs::path& dir) {
  Manifest m;
  for (const auto& e : fs::recursive_directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().filename() == kManifestName) continue;
    m[fs::relative(e.path(), dir).generic_string()] = sha256_file(e.path());
  }
  return m;
}

fs::path resolve_cache_dir(const std::optional<std::string>& flag) {
  if (flag && !flag->empty()) return *flag;
  if (const char* env = std::getenv("MRSNN_CACHE_DIR"); env && *env) return env;
  if (const char* home = std::getenv("HOME"); home && *home) return fs::path(home) / ".cache" / "mrsnn";
  return fs::path(".mrsnn-cache");
}

// ---- IDX ------------------------------------------------------------------------

IdxArray parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic) {
  if (bytes.size() < 4) throw ParseError("idx: truncated header at byte offset 0");
  const auto magic = be32(bytes, 0);
  if (magic != expected_magic) {
    std::ostringstream os;
    os << "idx: bad magic 0x" << std::hex << std::setw(8) << std::setfill('0') << magic
       << " at byte offset 0 (expected 0x" << std::setw(8) << expected_magic << ")";
    throw ParseError(os.str());
  }
  const std::size_t ndim = magic & 0xFF;
  if (bytes.size() < 4 + 4 * ndim) {
    throw ParseError("idx: truncated dimension header at byte offset " + std::to_string(bytes.size()));
  }
  IdxArray a;
  std::size_t total = 1;
  for (std::size_t d = 0; d < ndim; ++d) {
    a.dims.push_back(be32(bytes, 4 + 4 * d));
    total *= a.dims.back();
  }
  const std::size_t off = 4 + 4 * ndim;
  if (bytes.size() - off < total) {
    throw ParseError("idx: truncated data at byte offset " + std::to_string(bytes.size()) +
                     " (need " + std::to_string(off + total) + " bytes)");
  }
  if (bytes.size() - off > total) {
    throw ParseError("idx: trailing data at byte offset " + std::to_string(off + total));
  }
  a.data.assign(bytes.begin() + static_cast<std::ptrdiff_t>(off), bytes.end());
  return a;
}

std::vector<std::uint8_t> serialize_idx(const IdxArray& a) {
  std::vector<std::uint8_t> out;
  put_be32(out, 0x00000800u | static_cast<std::uint32_t>(a.dims.size()));
  for (auto d : a.dims) put_be32(out, d);
  out.insert(out.end(), a.data.begin(), a.data.end());
  return out;
}

namespace {

constexpr const char* kMnistFiles[2][2] = {
    {"train-images-idx3-ubyte", "train-labels-idx1-ubyte"},
    {"t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"},
};

std::vector<Sample> mnist_split(const fs::path& dir, const char* images_name, const char* labels_name,
                                int& h, int& w) {
  const auto images = parse_idx(read_bytes(dir / images_name), kIdxImagesMagic);
  const auto labels = parse_idx(read_bytes(dir / labels_name), kIdxLabelsMagic);
  if (images.dims.size() != 3) throw ParseError(std::string(images_name) + ": expected 3 dimensions");
  if (labels.dims.size() != 1) throw ParseError(std::string(labels_name) + ": expected 1 dimension");
  if (images.dims[0] != labels.dims[0]) {
    throw ParseError("idx: count mismatch, " + std::string(images_name) + " has " +
                     std::to_string(images.dims[0]) + " images but " + labels_name + " has " +
                     std::to_string(labels.dims[0]) + " labels (byte offset 4)");
  }
  h = static_cast<int>(images.dims[1]);
  w = static_cast<int>(images.dims[2]);
  const std::size_t px = static_cast<std::size_t>(h) * w;
  std::vector<Sample> out(images.dims[0]);
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].label = labels.data[i];
    if (out[i].label >= kNumClasses) {
      throw ParseError(std::string(labels_name) + ": label " + std::to_string(out[i].label) +
                       " at byte offset " + std::to_string(8 + i));
    }
    out[i].data.resize(px);
    for (std::size_t p = 0; p < px; ++p) out[i].data[p] = images.data[i * px + p] / 255.0f;
  }
  return out;
}

}  // namespace

Dataset load_mnist(const fs::path& dir) {
  coverage::mark("load_mnist");
  const auto manifest = read_manifest(dir / kManifestName);
  for (const auto& pair : kMnistFiles) {
    for (const char* f : pair) verify_file(manifest, dir, f);
  }
  Dataset ds;
  ds.modality = Modality::visual;
  int h = 0, w = 0, h2 = 0, w2 = 0;
  ds.train = mnist_split(dir, kMnistFiles[0][0], kMnistFiles[0][1], h, w);
  ds.test = mnist_split(dir, kMnistFiles[1][0], kMnistFiles[1][1], h2, w2);
  if (h != h2 || w != w2) throw ParseError("idx: train and test image sizes differ");
  ds.height = h;
  ds.width = w;
  ds.source = "mnist-idx:" + sha256_file(dir / kManifestName);
  return ds;
}

void write_mnist(const fs::path& dir, const Dataset& ds) {
  fs::create_directories(dir);
  const auto px = static_cast<std::size_t>(ds.height) * ds.width;
  for (int s = 0; s < 2; ++s) {
    const auto& part = s == 0 ? ds.train : ds.test;
    IdxArray images{{static_cast<std::uint32_t>(part.size()), static_cast<std::uint32_t>(ds.height),
                     static_cast<std::uint32_t>(ds.width)},
                    {}};
    IdxArray labels{{static_cast<std::uint32_t>(part.size())}, {}};
    for (const auto& smp : part) {
      if (smp.data.size() != px) throw DomainError("write_mnist: image size mismatch");
      for (float v : smp.data) {
        images.data.push_back(static_cast<std::uint8_t>(std::lround(std::clamp(v, 0.0f, 1.0f) * 255.0f)));
      }
      labels.data.push_back(static_cast<std::uint8_t>(smp.label));
    }
    write_bytes(dir / kMnistFiles[s][0], serialize_idx(images));
    write_bytes(dir / kMnistFiles[s][1], serialize_idx(labels));
  }
  Manifest m;
  for (const auto& pair : kMnistFiles) {
    for (const char* f : pair) m[f] = sha256_file(dir / f);
  }
  write_manifest(dir / kManifestName, m);
}

// ---- WAV ------------------------------------------------------------------------

Wav parse_wav(std::span<const std::uint8_t> b) {
  if (b.size() < 12) throw ParseError("wav: chunk 'RIFF' truncated at byte offset 0");
  if (std::memcmp(b.data(), "RIFF", 4) != 0) throw ParseError("wav: missing 'RIFF' chunk id");
  if (std::memcmp(b.data() + 8, "WAVE", 4) != 0) throw ParseError("wav: chunk 'RIFF' is not WAVE");
  std::size_t off = 12;
  bool have_fmt = false;
  Wav w;
  std::uint16_t bits = 0;
  while (off + 8 <= b.size()) {
    const std::string id(reinterpret_cast<const char*>(b.data() + off), 4);
    const std::size_t size = le32(b, off + 4);
    const std::size_t body = off + 8;
    if (body + size > b.size()) {
      throw ParseError("wav: chunk '" + id + "' at byte offset " + std::to_string(off) +
                       " declares " + std::to_string(size) + " bytes, only " +
                       std::to_string(b.size() - body) + " remain");
    }
    if (id == "fmt ") {
      if (size < 16) throw ParseError("wav: chunk 'fmt ' too short (" + std::to_string(size) + " bytes)");
      const auto format = le16(b, body);
      const auto channels = le16(b, body + 2);
      bits = le16(b, body + 14);
      if (format != 1) {
        throw UnsupportedFormat("wav: audio format " + std::to_string(format) + " (only PCM = 1)");
      }
      if (channels != 1) {
        throw UnsupportedFormat("wav: " + std::to_string(channels) + " channels (only mono)");
      }
      if (bits != 16) throw UnsupportedFormat("wav: " + std::to_string(bits) + "-bit samples (only 16)");
      w.sample_rate = static_cast<int>(le32(b, body + 4));
      if (w.sample_rate <= 0) throw ParseError("wav: chunk 'fmt ' has sample rate 0");
      have_fmt = true;
    } else if (id == "data") {
      if (!have_fmt) throw ParseError("wav: chunk 'data' precedes chunk 'fmt '");
      if (size % 2 != 0) throw ParseError("wav: chunk 'data' has odd byte count " + std::to_string(size));
      w.samples.resize(size / 2);
      for (std::size_t i = 0; i < w.samples.size(); ++i) {
        w.samples[i] = static_cast<float>(static_cast<std::int16_t>(le16(b, body + 2 * i))) / 32768.0f;
      }
      return w;
    }
    off = body + size + (size & 1);
  }
  throw ParseError(have_fmt ? "wav: chunk 'data' missing" : "wav: chunk 'fmt ' missing");
}

std::vector<std::uint8_t> serialize_wav(const Wav& w) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(w.samples.size() * 2);
  put_tag(out, "RIFF");
  put_le32(out, 36 + data_bytes);
  put_tag(out, "WAVE");
  put_tag(out, "fmt ");
  put_le32(out, 16);
  put_le16(out, 1);
  put_le16(out, 1);
  put_le32(out, static_cast<std::uint32_t>(w.sample_rate));
  put_le32(out, static_cast<std::uint32_t>(w.sample_rate) * 2);
  put_le16(out, 2);
  put_le16(out, 16);
  put_tag(out, "data");
  put_le32(out, data_bytes);
  for (float s : w.samples) {
    const long q = std::clamp(std::lround(static_cast<double>(s) * 32768.0), -32768L, 32767L);
    put_le16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
  }
  return out;
}

std::vector<std::string> test_speakers(std::vector<std::string> speakers) {
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());
  if (speakers.size() < 2) throw DomainError("speaker-disjoint split needs at least two speakers");
  const auto n_test = std::max<std::size_t>(1, (speakers.size() + 2) / 5);
  return {speakers.end() - static_cast<std::ptrdiff_t>(n_test), speakers.end()};
}

Dataset load_spoken_digits(const fs::path& dir) {
  coverage::mark("load_spoken_digits");
  const auto manifest = read_manifest(dir / kManifestName);
  struct Entry {
    std::string name, speaker;
    int label;
  };
  std::vector<Entry> entries;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file() || e.path().extension() != ".wav") continue;
    const auto stem = e.path().stem().string();
    const auto u1 = stem.find('_');
    const auto u2 = stem.rfind('_');
    if (u1 == std::string::npos || u2 == u1 || u1 != 1 || stem[0] < '0' || stem[0] > '9') {
      throw ParseError("spoken digits: file name '" + e.path().filename().string() +
                       "' is not <digit>_<speaker>_<index>.wav");
    }
    entries.push_back({e.path().filename().string(), stem.substr(u1 + 1, u2 - u1 - 1), stem[0] - '0'});
  }
  if (entries.empty()) throw ConfigError("spoken digits: no .wav files in " + dir.string());
  std::sort(entries.begin(), entries.end(), [](const Entry& a, const Entry& b) { return a.name < b.name; });

  std::vector<std::string> speakers;
  for (const auto& e : entries) speakers.push_back(e.speaker);
  const auto held_out = test_speakers(speakers);
  std::sort(speakers.begin(), speakers.end());
  speakers.erase(std::unique(speakers.begin(), speakers.end()), speakers.end());

  Dataset ds;
  ds.modality = Modality::auditory;
  for (const auto& e : entries) {
    verify_file(manifest, dir, e.name);
    auto w = parse_wav(read_bytes(dir / e.name));
    if (ds.sample_rate == 0) ds.sample_rate = w.sample_rate;
    if (w.sample_rate != ds.sample_rate) {
      throw UnsupportedFormat("spoken digits: " + e.name + " has sample rate " +
                              std::to_string(w.sample_rate) + ", corpus uses " +
                              std::to_string(ds.sample_rate));
    }
    Sample s;
    s.data = std::move(w.samples);
    s.label = e.label;
    s.group = static_cast<int>(std::lower_bound(speakers.begin(), speakers.end(), e.speaker) -
                               speakers.begin());
    const bool test = std::find(held_out.begin(), held_out.end(), e.speaker) != held_out.end();
    (test ? ds.test : ds.train).push_back(std::move(s));
  }
  ds.source = "spoken-digits:" + sha256_file(dir / kManifestName);
  return ds;
}

void write_spoken_digits(const fs::path& dir, const Dataset& ds) {
  if (ds.modality != Modality::auditory) throw DomainError("write_spoken_digits: not an audio dataset");
  fs::create_directories(dir);
  std::map<std::pair<int, int>, int> counter;
  for (const auto* part : {&ds.train, &ds.test}) {
    for (const auto& s : *part) {
      const int idx = counter[{s.label, s.group}]++;
      std::ostringstream name;
      name << s.label << "_spk" << std::setw(2) << std::setfill('0') << s.group << '_' << idx << ".wav";
      write_bytes(dir / name.str(), serialize_wav({ds.sample_rate, s.data}));
    }
  }
  write_manifest(dir / kManifestName, build_manifest(dir));
}

// ---- synthetic corpora ------------------------------------------------------------

std::array<Formants, 2> digit_formants(int digit) {
  if (digit < 0 || digit >= kNumClasses) throw DomainError("digit_formants: digit out of range");
  // Rough adult vowel formants. Digits sharing one segment differ in the other.
  static constexpr Formants vowel[7] = {
      {270, 2290}, {730, 1090}, {300, 870}, {530, 1840}, {570, 840}, {660, 1720}, {490, 1350}};
  static constexpr int seq[kNumClasses][2] = {{0, 2}, {1, 3}, {2, 1}, {3, 4}, {4, 0},
                                              {5, 6}, {6, 1}, {0, 5}, {2, 6}, {4, 3}};
  return {vowel[seq[digit][0]], vowel[seq[digit][1]]};
}

namespace {

std::vector<float> bar_image(int digit, Rng& rng) {
  constexpr int n = 28;
  std::vector<float> img(n * n);
  const double theta = digit * std::numbers::pi / kNumClasses;
  const double cx = 13.5 + uniform(rng, -2.0, 2.0), cy = 13.5 + uniform(rng, -2.0, 2.0);
  const double dx = std::cos(theta), dy = std::sin(theta);
  for (int y = 0; y < n; ++y) {
    for (int x = 0; x < n; ++x) {
      const double px = x - cx, py = y - cy;
      const double along = px * dx + py * dy;
      const double across = -px * dy + py * dx;
      double v = (std::abs(across) < 1.6 && std::abs(along) < 10.0) ? 0.9 : 0.0;
      v += uniform(rng, -0.1, 0.1);
      img[static_cast<std::size_t>(y * n + x)] = static_cast<float>(std::clamp(v, 0.0, 1.0));
    }
  }
  return img;
}

std::vector<float> vowel_utterance(int digit, double speaker_scale, Rng& rng,
                                   const SyntheticAudioOptions& o) {
  const auto seg = digit_formants(digit);
  const double scale = speaker_scale * (1.0 + uniform(rng, -o.token_jitter, o.token_jitter));
  const double dur = o.duration * uniform(rng, 0.85, 1.15);
  const auto n = static_cast<std::size_t>(dur * o.sample_rate);
  const double lead = uniform(rng, 0.0, 0.04);
  const double split = uniform(rng, 0.4, 0.6);
  const double a2 = uniform(rng, 0.5, 1.0);
  const double ph1 = uniform(rng, 0.0, 2 * std::numbers::pi), ph2 = uniform(rng, 0.0, 2 * std::numbers::pi);
  constexpr double fade = 0.08;  // crossfade width, fraction of the utterance
  std::vector<float> out(n);
  // Integrate the instantaneous frequency so the crossfade has no phase jumps.
  double phase1 = ph1, phase2 = ph2;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / o.sample_rate;
    const double rel = (t - lead) / (dur - lead);
    double env = 0.0;
    if (rel > 0.0 && rel < 1.0) env = std::sin(std::numbers::pi * rel);
    const double mix = std::clamp((rel - split) / fade + 0.5, 0.0, 1.0);
    const double f1 = scale * ((1 - mix) * seg[0].f1 + mix * seg[1].f1);
    const double f2 = scale * ((1 - mix) * seg[0].f2 + mix * seg[1].f2);
    phase1 += 2 * std::numbers::pi * f1 / o.sample_rate;
    phase2 += 2 * std::numbers::pi * f2 / o.sample_rate;
    const double tone = std::sin(phase1) + a2 * std::sin(phase2);
    const double v = 0.3 * (env * tone + o.noise * normal01(rng));
    out[i] = static_cast<float>(std::clamp(v, -1.0, 32767.0 / 32768.0));
  }
  return out;
}

}  // namespace

Dataset synthetic_corpus(SyntheticKind kind, int n, std::uint64_t seed,
                         const SyntheticAudioOptions& audio) {
  coverage::mark("synthetic_corpus");
  if (n <= 0) throw DomainError("synthetic_corpus: n must be positive, got " + std::to_string(n));
  Dataset ds;
  Rng rng(derive_seed(seed, kind == SyntheticKind::images ? 0x1A6EULL : 0xA0D1ULL));
  if (kind == SyntheticKind::images) {
    ds.modality = Modality::visual;
    ds.height = ds.width = 28;
    ds.source = "synthetic-images:" + std::to_string(seed);
    const int n_train = n - n / 5;
    for (int i = 0; i < n; ++i) {
      Sample s;
      s.label = i % kNumClasses;
      s.data = bar_image(s.label, rng);
      (i < n_train ? ds.train : ds.test).push_back(std::move(s));
    }
    return ds;
  }
  if (audio.speakers < 2) throw DomainError("synthetic_corpus: need at least two speakers");
  ds.modality = Modality::auditory;
  ds.sample_rate = audio.sample_rate;
  ds.source = "synthetic-audio:" + std::to_string(seed);
  std::vector<double> pitch(static_cast<std::size_t>(audio.speakers));
  for (auto& p : pitch) p = 1.0 + uniform(rng, -audio.pitch_spread, audio.pitch_spread);
  std::vector<std::string> names;
  for (int s = 0; s < audio.speakers; ++s) names.push_back(std::to_string(s));
  const auto held = test_speakers(names);
  for (int i = 0; i < n; ++i) {
    Sample s;
    s.label = i % kNumClasses;
    s.group = (i / kNumClasses) % audio.speakers;
    s.data = vowel_utterance(s.label, pitch[static_cast<std::size_t>(s.group)], rng, audio);
    const bool test = std::find(held.begin(), held.end(), std::to_string(s.group)) != held.end();
    (test ? ds.test : ds.train).push_back(std::move(s));
  }
  return ds;
}

// ---- pairing ----------------------------------------------------------------------

std::vector<PairedSample> make_pairs(const std::vector<Sample>& visual,
                                     const std::vector<Sample>& auditory, const PairSpec& spec,
                                     int n, std::uint64_t seed) {
  coverage::mark("make_pairs");
  if (n < 0) throw DomainError("make_pairs: n must be >= 0");
  std::array<std::vector<std::size_t>, kNumClasses> vis_by, aud_by;
  for (std::size_t i = 0; i < visual.size(); ++i) vis_by.at(static_cast<std::size_t>(visual[i].label)).push_back(i);
  for (std::size_t i = 0; i < auditory.size(); ++i) aud_by.at(static_cast<std::size_t>(auditory[i].label)).push_back(i);

  Rng rng(derive_seed(seed, 0x9A125ULL));
  std::vector<PairedSample> out;
  out.reserve(static_cast<std::size_t>(n));
  auto pick = [&](const std::vector<std::size_t>& pool) { return pool[uniform_index(rng, pool.size())]; };

  if (spec.congruent) {
    std::vector<int> classes;
    for (int c = 0; c < kNumClasses; ++c) {
      if (!vis_by[c].empty() && !aud_by[c].empty()) classes.push_back(c);
    }
    if (classes.empty()) throw DomainError("make_pairs: no label is present in both datasets");
    for (int i = 0; i < n; ++i) {
      const int c = classes[uniform_index(rng, classes.size())];
      out.push_back({pick(vis_by[c]), pick(aud_by[c]), c, c, true, c});
    }
    return out;
  }
  const int vl = spec.visual_label, al = spec.auditory_label;
  if (vl < 0 || vl >= kNumClasses || vis_by[vl].empty()) {
    throw DomainError("make_pairs: visual label " + std::to_string(vl) + " absent");
  }
  if (al < 0 || al >= kNumClasses || aud_by[al].empty()) {
    throw DomainError("make_pairs: auditory label " + std::to_string(al) + " absent");
  }
  for (int i = 0; i < n; ++i) {
    out.push_back({pick(vis_by[vl]), pick(aud_by[al]), vl, al, vl == al, vl});
  }
  return out;
}

}  // namespace mrsnn
