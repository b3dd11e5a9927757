// ksvc: command-line front end for the concatenative conversion engine.
//
//   ksvc extract <wav> -o <prefix>
//   ksvc convert <src.wav> <ref.wav>... [--k 4 --kprime 32 --m 0.3 ...]
//   ksvc bench --pool 10000 --dim 1024 --queries 500
//   ksvc inspect <file.ksvc|file.wav>

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>

#include "CLI11.hpp"
#include "ksvc/io.hpp"
#include "ksvc/matcher.hpp"
#include "ksvc/pipeline.hpp"
#include "ksvc/smoother.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;

struct CommonFlags {
  std::string config_path;
  int sample_rate = 0;
  int hop_size = 0;
  int fft_size = 0;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config file (flags take precedence)");
  cmd->add_option("--sample-rate", f.sample_rate, "analysis sample rate in Hz");
  cmd->add_option("--hop", f.hop_size, "hop size in samples");
  cmd->add_option("--fft", f.fft_size, "FFT size in samples (power of two)");
}

ksvc::EngineConfig resolve_config(const CommonFlags& f) {
  ksvc::EngineConfig cfg;
  if (!f.config_path.empty()) cfg = ksvc::load_config(f.config_path, cfg);
  if (f.sample_rate > 0) cfg.audio.sample_rate = f.sample_rate;
  if (f.hop_size > 0) cfg.audio.hop_size = f.hop_size;
  if (f.fft_size > 0) cfg.audio.fft_size = f.fft_size;
  return cfg;
}

// --- inspect ----------------------------------------------------------------

const char* kind_label(ksvc::io::FrameKind kind) {
  switch (kind) {
    case ksvc::io::FrameKind::kFeatures: return "features";
    case ksvc::io::FrameKind::kPitch: return "pitch";
    case ksvc::io::FrameKind::kHarmonics: return "harmonics";
  }
  return "?";
}

void inspect(const std::filesystem::path& path) {
  if (path.extension() == ".wav") {
    const auto wave = ksvc::io::read_wav(path);
    std::cout << "wav: " << path.string() << "\n"
              << "  sample_rate: " << wave.sample_rate << "\n"
              << "  samples: " << wave.size() << "\n"
              << "  duration_s: " << wave.duration() << "\n";
    return;
  }
  const auto file = ksvc::io::read_ksvc(path);
  const auto& h = file.header;
  double lo = INFINITY, hi = -INFINITY, sum = 0.0;
  std::size_t zero_rows = 0;
  for (std::size_t t = 0; t < file.data.rows(); ++t) {
    bool all_zero = true;
    for (float v : file.data.row(t)) {
      lo = std::min(lo, static_cast<double>(v));
      hi = std::max(hi, static_cast<double>(v));
      sum += v;
      all_zero = all_zero && v == 0.0f;
    }
    zero_rows += all_zero;
  }
  const std::size_t n = file.data.data().size();
  std::cout << "ksvc: " << path.string() << "\n"
            << "  version: " << ksvc::io::KsvcHeader::kVersion << "\n"
            << "  kind: " << kind_label(h.kind) << "\n"
            << "  frames: " << h.frames << "\n"
            << "  dim: " << h.dim << "\n"
            << "  sample_rate: " << h.sample_rate << "\n"
            << "  hop_size: " << h.hop_size << "\n"
            << "  all_zero_rows: " << zero_rows << "\n";
  if (n > 0) {
    std::cout << "  min: " << lo << "\n  max: " << hi << "\n  mean: " << sum / n << "\n";
  }
}

// --- bench ------------------------------------------------------------------

struct BenchFlags {
  std::size_t pool = 10000;
  std::size_t dim = 1024;
  std::size_t queries = 500;
  std::size_t k = 4;
  std::size_t frames = 200;
  std::uint64_t seed = 1234;
  bool oracle = false;
};

ksvc::ReferencePool random_pool(std::size_t rows, std::size_t dim, std::mt19937_64& rng) {
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  ksvc::matcher::Utterance u;
  u.features.frames = ksvc::FrameMatrix(rows, dim);
  for (auto& v : u.features.frames.data()) v = gauss(rng);
  u.pitch.f0.assign(rows, 0.0f);
  u.harmonics.amplitudes = ksvc::FrameMatrix(rows, 1);
  return ksvc::matcher::build_pool({u});
}

int bench(const BenchFlags& f) {
  if (f.pool == 0 || f.dim == 0 || f.queries == 0 || f.k == 0 || f.k > f.pool) {
    throw ksvc::ValidationError("bench sizes must be positive and k <= pool");
  }
  std::mt19937_64 rng(f.seed);
  const auto pool = random_pool(f.pool, f.dim, rng);
  ksvc::FeatureSequence queries{ksvc::FrameMatrix(f.queries, f.dim)};
  std::normal_distribution<float> gauss(0.0f, 1.0f);
  for (auto& v : queries.frames.data()) v = gauss(rng);

  using Clock = std::chrono::steady_clock;
  auto start = Clock::now();
  const auto sets = ksvc::matcher::knn_query(pool, queries, f.k);
  const double knn_s = std::chrono::duration<double>(Clock::now() - start).count();

  std::uint64_t checksum = 1469598103934665603ull;
  for (const auto& s : sets) {
    for (auto i : s.indices) checksum = (checksum ^ i) * 1099511628211ull;
  }

  std::cout << "knn_query: pool=" << f.pool << " dim=" << f.dim << " queries=" << f.queries
            << " k=" << f.k << "\n"
            << "  seconds: " << knn_s << "\n"
            << "  queries_per_second: " << f.queries / std::max(knn_s, 1e-12) << "\n"
            << "  index_checksum: " << checksum << "\n";

  // weight optimisation on contiguous random sets
  const std::size_t frames = std::min(f.frames, f.queries);
  std::vector<ksvc::CandidateSet> opt_sets(sets.begin(), sets.begin() + static_cast<std::ptrdiff_t>(frames));
  ksvc::smoother::SmootherConfig cfg;
  cfg.k = f.k;
  cfg.tol = 1e-300;  // run the full iteration budget
  start = Clock::now();
  const auto opt = ksvc::smoother::optimize_weights(pool, opt_sets, cfg);
  const double opt_s = std::chrono::duration<double>(Clock::now() - start).count();
  std::cout << "optimize_weights: frames=" << frames << " k=" << f.k << "\n"
            << "  iterations: " << opt.iterations << "\n"
            << "  iterations_per_second: " << opt.iterations / std::max(opt_s, 1e-12) << "\n"
            << "  objective_before: " << opt.objective_before << "\n"
            << "  objective_after: " << opt.objective_after << "\n";

  if (f.oracle) {
    bool exact = true;
    for (std::size_t t = 0; t < f.queries && exact; ++t) {
      // exhaustive scan: cosine in double, sort all rows, ties by lower index
      const auto q = queries[t];
      double qn = 0.0;
      for (float v : q) qn += static_cast<double>(v) * v;
      std::vector<std::pair<double, std::size_t>> all;
      for (std::size_t i = 0; i < pool.size(); ++i) {
        const auto r = pool.features[i];
        double dot = 0.0, rn = 0.0;
        for (std::size_t d = 0; d < f.dim; ++d) {
          dot += static_cast<double>(r[d]) * q[d];
          rn += static_cast<double>(r[d]) * r[d];
        }
        all.emplace_back(-dot / std::sqrt(rn * qn), i);
      }
      std::sort(all.begin(), all.end());
      for (std::size_t j = 0; j < f.k; ++j) exact = exact && all[j].second == sets[t].indices[j];
    }
    std::cout << (exact ? "oracle: exact match" : "oracle: MISMATCH") << "\n";
    if (!exact) return 1;
  }
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"ksvc: kNN concatenative voice conversion engine"};
  app.require_subcommand(1);

  // extract
  CommonFlags extract_common;
  std::string extract_wav, extract_prefix;
  auto* extract = app.add_subcommand("extract", "analyse a WAV into .ksvc feature/pitch/harmonic files");
  extract->add_option("wav", extract_wav, "input WAV")->required();
  extract->add_option("-o,--out", extract_prefix, "output prefix (default: input path without extension)");
  std::size_t extract_harmonics = 0, extract_mels = 0;
  extract->add_option("--harmonics", extract_harmonics, "harmonic count N");
  extract->add_option("--mels", extract_mels, "mel channels");
  add_common(extract, extract_common);

  // convert
  CommonFlags convert_common;
  std::string src_wav;
  std::vector<std::string> ref_wavs, feature_files;
  std::string out_dir = ".";
  std::size_t k = 0, kprime = 0, harmonics = 0;
  double m = -1.0;
  double semitones = 0.0;
  bool no_smooth = false, no_as = false;
  auto* convert = app.add_subcommand("convert", "convert a source utterance towards reference audio");
  convert->add_option("source", src_wav, "source WAV")->required();
  convert->add_option("references", ref_wavs, "reference WAVs")->required();
  convert->add_option("--out-dir", out_dir, "directory for out.feat.ksvc, out.harmonic.wav, report.json");
  convert->add_option("--k", k, "candidates blended per frame (default 4)");
  convert->add_option("--kprime", kprime, "similarity pre-cut before pitch ranking (default 32)");
  convert->add_option("--m", m, "concatenation weight (default 0.3)");
  convert->add_option("--harmonics", harmonics, "harmonic count N (default 50)");
  auto* semis_opt = convert->add_option("--semitones", semitones, "fixed transposition in semitones (fractional allowed)");
  convert->add_option("--features", feature_files,
                      "external .ksvc features: source first, then one per reference");
  convert->add_flag("--no-smooth", no_smooth, "skip reselection and weight optimisation");
  convert->add_flag("--no-as", no_as, "skip harmonic selection and additive synthesis");
  add_common(convert, convert_common);

  // bench
  BenchFlags bench_flags;
  auto* bench_cmd = app.add_subcommand("bench", "throughput of kNN search and weight optimisation");
  bench_cmd->add_option("--pool", bench_flags.pool, "pool rows");
  bench_cmd->add_option("--dim", bench_flags.dim, "feature dimension");
  bench_cmd->add_option("--queries", bench_flags.queries, "query frames");
  bench_cmd->add_option("--k", bench_flags.k, "neighbours per query");
  bench_cmd->add_option("--frames", bench_flags.frames, "frames for weight optimisation");
  bench_cmd->add_option("--seed", bench_flags.seed, "random seed");
  bench_cmd->add_flag("--oracle", bench_flags.oracle, "verify kNN indices against an exhaustive scan");

  // inspect
  std::string inspect_path;
  auto* inspect_cmd = app.add_subcommand("inspect", "print the header and statistics of a .ksvc or WAV file");
  inspect_cmd->add_option("file", inspect_path, "file to inspect")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitValidation;
  }

  try {
    if (*extract) {
      auto cfg = resolve_config(extract_common);
      if (extract_harmonics > 0) cfg.harmonics = extract_harmonics;
      if (extract_mels > 0) cfg.n_mels = extract_mels;
      std::string prefix = extract_prefix;
      if (prefix.empty()) prefix = (std::filesystem::path(extract_wav).parent_path() /
                                    std::filesystem::path(extract_wav).stem()).string();
      const auto out = ksvc::extract_files(extract_wav, prefix, cfg);
      if (out.resampled) {
        std::cerr << "note: resampled input from " << out.input_rate << " Hz to "
                  << cfg.audio.sample_rate << " Hz before analysis\n";
      }
      std::cout << "frames: " << out.frames << "\n"
                << "features: " << out.features.string() << "\n"
                << "pitch: " << out.pitch.string() << "\n"
                << "harmonics: " << out.harmonics.string() << "\n";
    } else if (*convert) {
      ksvc::ConvertRequest req;
      req.config = resolve_config(convert_common);
      if (k > 0) req.config.k = k;
      if (kprime > 0) req.config.k_prime = kprime;
      if (m >= 0.0) req.config.smoother.m = m;
      else if (convert->count("--m") > 0) throw ksvc::ValidationError("--m must be >= 0");
      if (harmonics > 0) req.config.harmonics = harmonics;
      if (semis_opt->count() > 0) req.config.semitones = semitones;
      if (no_smooth) req.config.smooth = false;
      if (no_as) req.config.additive = false;
      req.config.smoother.k = req.config.k;
      req.source = src_wav;
      for (const auto& r : ref_wavs) req.references.emplace_back(r);
      for (const auto& f : feature_files) req.external_features.emplace_back(f);
      req.out_dir = out_dir;
      const auto out = ksvc::convert_files(req);
      std::cout << "features: " << out.features.string() << "\n";
      if (out.render) std::cout << "render: " << out.render->string() << "\n";
      std::cout << "report: " << out.report.string() << "\n";
    } else if (*bench_cmd) {
      return bench(bench_flags);
    } else if (*inspect_cmd) {
      inspect(inspect_path);
    }
  } catch (const ksvc::ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const ksvc::IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
