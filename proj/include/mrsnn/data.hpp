#pragma once

// Corpus ingestion: MNIST IDX files, PCM-16 WAV spoken digits, synthetic
// stand-ins, and visual/auditory pairing.
//
// Every loader checks files against a SHA-256 manifest ("<hex>  <relpath>"
// per line, the sha256sum format) kept next to the data.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mrsnn/common.hpp"
#include "mrsnn/encoding.hpp"

namespace mrsnn {

struct Sample {
  std::vector<float> data;  // pixels in [0,1] or waveform in [-1,1]
  int label = 0;
  int group = -1;  // speaker id for audio, -1 otherwise
};

enum class Split { train, test };

struct Dataset {
  Modality modality = Modality::visual;
  int sample_rate = 0;  // audio only
  int height = 0, width = 0;  // images only
  std::vector<Sample> train;
  std::vector<Sample> test;
  std::string source;  // provenance identifier

  const std::vector<Sample>& split(Split s) const { return s == Split::train ? train : test; }
  // SHA-256 over a canonical serialization of every field above.
  std::string checksum() const;
};

void save_dataset(const std::filesystem::path& path, const Dataset& ds);
Dataset load_dataset(const std::filesystem::path& path);

// ---- checksums --------------------------------------------------------

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string sha256_file(const std::filesystem::path& path);

using Manifest = std::map<std::string, std::string>;  // relpath -> hex digest

inline constexpr const char* kManifestName = "SHA256SUMS";

Manifest read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, const Manifest& m);
// Hashes `dir / relpath` and compares with the manifest entry. Throws
// ParseError when the entry is missing or the digest differs.
void verify_file(const Manifest& m, const std::filesystem::path& dir, const std::string& relpath);
// Writes a manifest covering every regular file under `dir` (recursively).
Manifest build_manifest(const std::filesystem::path& dir);

// Flag value, else $MRSNN_CACHE_DIR, else $HOME/.cache/mrsnn.
std::filesystem::path resolve_cache_dir(const std::optional<std::string>& flag);

// ---- IDX ------------------------------------------------------------------

inline constexpr std::uint32_t kIdxImagesMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelsMagic = 0x00000801;

struct IdxArray {
  std::vector<std::uint32_t> dims;
  std::vector<std::uint8_t> data;
};

// Parses an unsigned-byte IDX buffer, checking the magic number.
IdxArray parse_idx(std::span<const std::uint8_t> bytes, std::uint32_t expected_magic);
std::vector<std::uint8_t> serialize_idx(const IdxArray& a);

// Reads train-images-idx3-ubyte / train-labels-idx1-ubyte and the t10k-*
// pair from `dir`, verifying them against dir/SHA256SUMS.
Dataset load_mnist(const std::filesystem::path& dir);
// Writes the four IDX files and the manifest.
void write_mnist(const std::filesystem::path& dir, const Dataset& ds);

// ---- WAV ------------------------------------------------------------------

struct Wav {
  int sample_rate = 0;
  std::vector<float> samples;  // int16 / 32768
  double duration() const {
    return sample_rate > 0 ? static_cast<double>(samples.size()) / sample_rate : 0.0;
  }
};

Wav parse_wav(std::span<const std::uint8_t> bytes);
// Samples are clamped to [-1, 1) and rounded to int16.
std::vector<std::uint8_t> serialize_wav(const Wav& w);

// Directory of "<digit>_<speaker>_<index>.wav" files. Speakers are sorted by
// name and the last 20% (at least one) form the test split.
Dataset load_spoken_digits(const std::filesystem::path& dir);
// Writes the audio dataset in the layout load_spoken_digits reads, with a
// manifest. Speaker names are "spk<group>".
void write_spoken_digits(const std::filesystem::path& dir, const Dataset& ds);

// Splits `speakers` sorted names 80/20; returns the test set.
std::vector<std::string> test_speakers(std::vector<std::string> speakers);

// ---- synthetic corpora ------------------------------------------------------

enum class SyntheticKind { images, audio };

struct SyntheticAudioOptions {
  int sample_rate = 8000;
  int speakers = 10;
  double duration = 0.5;        // seconds, before jitter
  double pitch_spread = 0.06;   // speaker formant scale in [1 - s, 1 + s]
  double token_jitter = 0.03;   // per-utterance extra scale
  double noise = 0.1;           // white-noise amplitude relative to tones
};

// Corpus size written by `mrsnn synth-audio` unless --n is given.
inline constexpr int kDefaultSyntheticUtterances = 10000;

// images: 28x28 oriented bars, one orientation per class, with pixel noise.
// audio: two vowel-like segments per class (see digit_formants), scaled by
// a speaker factor, with a random segment boundary, amplitude envelope and
// white noise. Samples are split into
// train/test (images 80/20 by index, audio 80/20 by speaker).
Dataset synthetic_corpus(SyntheticKind kind, int n, std::uint64_t seed,
                         const SyntheticAudioOptions& audio = {});

struct Formants {
  double f1 = 0.0, f2 = 0.0;  // Hz
};
// The two segments of a digit, in order.
std::array<Formants, 2> digit_formants(int digit);

// ---- pairing ----------------------------------------------------------------

struct PairedSample {
  std::size_t visual = 0;    // index into the visual split
  std::size_t auditory = 0;  // index into the auditory split
  int visual_label = 0;
  int auditory_label = 0;
  bool congruent = true;
  int assigned_label = 0;  // training target; the visual label for incongruent pairs
};

struct PairSpec {
  bool congruent = true;
  int visual_label = -1;    // incongruent only
  int auditory_label = -1;  // incongruent only

  static PairSpec matching() { return {}; }
  static PairSpec mismatched(int visual_label, int auditory_label) {
    return {false, visual_label, auditory_label};
  }
};

// Congruent: a class drawn uniformly from those present in both splits,
// then a uniform sample of that class from each side. Incongruent: uniform
// samples with the requested labels. Throws DomainError when a needed label
// is absent.
std::vector<PairedSample> make_pairs(const std::vector<Sample>& visual,
                                     const std::vector<Sample>& auditory, const PairSpec& spec,
                                     int n, std::uint64_t seed);

}  // namespace mrsnn
