#include "ksvc/pipeline.hpp"

#include <chrono>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "ksvc/io.hpp"
#include "ksvc/matcher.hpp"
#include "ksvc/synth.hpp"

namespace ksvc {
namespace {

using json = nlohmann::json;
using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename T>
void read_key(const json& obj, const char* key, T& dst) {
  if (obj.contains(key)) dst = obj.at(key).get<T>();
}

void reject_unknown(const json& obj, std::initializer_list<const char*> known, const char* where) {
  for (const auto& [key, value] : obj.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw ValidationError(std::string("unknown config key '") + key + "' in " + where);
  }
}

json optional_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

void truncate_analysis(Analysis& a, std::size_t frames) {
  auto cut = [frames](FrameMatrix& m) {
    if (m.rows() <= frames) return;
    std::vector<float> data(m.data().begin(),
                            m.data().begin() + static_cast<std::ptrdiff_t>(frames * m.cols()));
    m = FrameMatrix(frames, m.cols(), std::move(data));
  };
  cut(a.features.frames);
  cut(a.harmonics.amplitudes);
  if (a.pitch.f0.size() > frames) a.pitch.f0.resize(frames);
}

}  // namespace

void EngineConfig::validate() const {
  audio.validate();
  if (!(pitch.f_min > 0.0 && pitch.f_min < pitch.f_max && pitch.f_max < audio.sample_rate / 2.0)) {
    throw ValidationError("pitch range must satisfy 0 < f_min < f_max < sample_rate/2");
  }
  if (n_mels == 0) throw ValidationError("n_mels must be at least 1");
  if (harmonics == 0) throw ValidationError("harmonics must be at least 1");
  if (k == 0) throw ValidationError("k must be at least 1");
  if (k_prime < k) throw ValidationError("k' must be at least k");
  smoother.validate();
  if (semitones && !std::isfinite(*semitones)) throw ValidationError("semitones must be finite");
}

EngineConfig apply_config_json(const std::string& json_text, EngineConfig cfg) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!doc.is_object()) throw ValidationError("config must be a JSON object");
  try {
    reject_unknown(doc, {"audio", "pitch", "features", "matching", "smoothing", "additive_synthesis"},
                   "config");
    if (doc.contains("audio")) {
      const auto& a = doc.at("audio");
      reject_unknown(a, {"sample_rate", "hop_size", "fft_size"}, "audio");
      read_key(a, "sample_rate", cfg.audio.sample_rate);
      read_key(a, "hop_size", cfg.audio.hop_size);
      read_key(a, "fft_size", cfg.audio.fft_size);
    }
    if (doc.contains("pitch")) {
      const auto& p = doc.at("pitch");
      reject_unknown(p, {"f_min", "f_max", "threshold"}, "pitch");
      read_key(p, "f_min", cfg.pitch.f_min);
      read_key(p, "f_max", cfg.pitch.f_max);
      read_key(p, "threshold", cfg.pitch.threshold);
    }
    if (doc.contains("features")) {
      const auto& f = doc.at("features");
      reject_unknown(f, {"n_mels"}, "features");
      read_key(f, "n_mels", cfg.n_mels);
    }
    if (doc.contains("matching")) {
      const auto& m = doc.at("matching");
      reject_unknown(m, {"k", "k_prime", "harmonics"}, "matching");
      read_key(m, "k", cfg.k);
      read_key(m, "k_prime", cfg.k_prime);
      read_key(m, "harmonics", cfg.harmonics);
    }
    if (doc.contains("smoothing")) {
      const auto& s = doc.at("smoothing");
      reject_unknown(s, {"enabled", "m", "max_iters", "step_size", "tol"}, "smoothing");
      read_key(s, "enabled", cfg.smooth);
      read_key(s, "m", cfg.smoother.m);
      read_key(s, "max_iters", cfg.smoother.max_iters);
      read_key(s, "step_size", cfg.smoother.step_size);
      read_key(s, "tol", cfg.smoother.tol);
    }
    if (doc.contains("additive_synthesis")) {
      const auto& a = doc.at("additive_synthesis");
      reject_unknown(a, {"enabled", "semitones"}, "additive_synthesis");
      read_key(a, "enabled", cfg.additive);
      if (a.contains("semitones")) {
        const auto& s = a.at("semitones");
        cfg.semitones = s.is_null() ? std::nullopt : std::optional<double>(s.get<double>());
      }
    }
  } catch (const json::exception& e) {
    throw ValidationError(std::string("bad config value: ") + e.what());
  }
  cfg.smoother.k = cfg.k;
  return cfg;
}

EngineConfig load_config(const std::filesystem::path& path, EngineConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return apply_config_json(ss.str(), std::move(base));
}

Waveform conform(const Waveform& wave, const AudioConfig& audio, bool* resampled) {
  wave.validate();
  const bool needs = wave.sample_rate != audio.sample_rate;
  if (resampled) *resampled = needs;
  return needs ? io::resample(wave, audio.sample_rate) : wave;
}

Analysis analyze(const Waveform& wave, const EngineConfig& cfg) {
  cfg.validate();
  const auto spec = dsp::stft(wave, cfg.audio);
  Analysis a;
  a.pitch = dsp::detect_pitch(wave, cfg.audio, cfg.pitch);
  a.harmonics = dsp::extract_harmonics(spec, a.pitch, cfg.harmonics);
  a.features = dsp::melspec_features(spec, cfg.n_mels);
  return a;
}

void adopt_external_features(Analysis& analysis, FeatureSequence external) {
  external.validate();
  const std::size_t own = analysis.pitch.size();
  const std::size_t ext = external.frame_count();
  const std::size_t diff = own > ext ? own - ext : ext - own;
  if (diff > 1) {
    throw ValidationError("external features have " + std::to_string(ext) +
                          " frames, expected " + std::to_string(own) + " (+-1)");
  }
  analysis.features = std::move(external);
  truncate_analysis(analysis, std::min(own, ext));
}

std::string report_to_json(const ConversionReport& r, bool include_timings) {
  const EngineConfig& c = r.config;
  json doc;
  doc["version"] = 1;
  doc["hyperparameters"] = {
      {"k", c.k},
      {"k_prime", c.k_prime},
      {"harmonics", c.harmonics},
      {"m", c.smoother.m},
      {"max_iters", c.smoother.max_iters},
      {"step_size", c.smoother.step_size},
      {"tol", c.smoother.tol},
      {"n_mels", c.n_mels},
      {"sample_rate", c.audio.sample_rate},
      {"hop_size", c.audio.hop_size},
      {"fft_size", c.audio.fft_size},
      {"f_min", c.pitch.f_min},
      {"f_max", c.pitch.f_max},
      {"smoothing", c.smooth},
      {"additive_synthesis", c.additive},
      {"feature_space", r.feature_space},
  };
  doc["frames"] = r.frames;
  doc["pool_frames"] = r.pool_frames;
  doc["reference_utterances"] = r.reference_utterances;
  doc["objective_before"] = optional_json(r.objective_before);
  doc["objective_after"] = optional_json(r.objective_after);
  doc["weight_iterations"] = r.weight_iterations;
  doc["roughness_output"] = optional_json(r.roughness_output);
  doc["roughness_knn"] = optional_json(r.roughness_knn);
  doc["semitone_shift"] = optional_json(r.semitone_shift);
  doc["render_scale"] = optional_json(r.render_scale);
  if (include_timings) {
    doc["timings_ms"] = {
        {"analysis", r.timings.analysis_ms}, {"matching", r.timings.matching_ms},
        {"reselect", r.timings.reselect_ms}, {"weights", r.timings.weights_ms},
        {"synthesis", r.timings.synthesis_ms}, {"total", r.timings.total_ms},
    };
  }
  return doc.dump(2);
}

ConversionResult convert(const Analysis& source, const std::vector<Analysis>& references,
                         const EngineConfig& cfg_in) {
  EngineConfig cfg = cfg_in;
  cfg.smoother.k = cfg.k;
  cfg.validate();
  if (references.empty()) throw ValidationError("at least one reference utterance is required");
  if (source.features.frame_count() != source.pitch.size()) {
    throw ValidationError("source features and pitch differ in frame count");
  }

  const auto total_start = Clock::now();
  ConversionResult result;
  ConversionReport& report = result.report;
  report.config = cfg;
  report.frames = source.features.frame_count();
  report.reference_utterances = references.size();

  std::vector<matcher::Utterance> utts;
  utts.reserve(references.size());
  for (const auto& ref : references) utts.push_back({ref.features, ref.pitch, ref.harmonics});

  auto start = Clock::now();
  const ReferencePool pool = matcher::build_pool(utts);
  report.pool_frames = pool.size();
  const auto knn_sets = matcher::knn_query(pool, source.features, cfg.k);
  report.timings.matching_ms = ms_since(start);

  std::vector<CandidateSet> sets = knn_sets;
  if (cfg.smooth && !knn_sets.empty()) {
    start = Clock::now();
    sets = smoother::reselect(pool, source.features, knn_sets, cfg.smoother);
    report.timings.reselect_ms = ms_since(start);

    start = Clock::now();
    auto opt = smoother::optimize_weights(pool, sets, cfg.smoother);
    report.timings.weights_ms = ms_since(start);
    report.objective_before = opt.objective_before;
    report.objective_after = opt.objective_after;
    report.weight_iterations = opt.iterations;
    sets = std::move(opt.sets);
  }

  result.features = matcher::average_candidates(pool, sets);
  if (result.features.frame_count() >= 2) {
    report.roughness_output = smoother::roughness(result.features);
    report.roughness_knn = smoother::roughness(matcher::average_candidates(pool, knn_sets));
  }

  if (cfg.additive) {
    start = Clock::now();
    double shift = 0.0;
    PitchTrack target;
    if (!cfg.semitones && source.pitch.voiced_count() == 0) {
      // nothing to transpose: the render is silent regardless of the shift
      target = source.pitch;
    } else {
      target = dsp::transpose_pitch(source.pitch, pool.pitch, cfg.semitones, &shift);
    }
    report.semitone_shift = shift;
    // short pools cannot supply k' candidates; use all of them
    const std::size_t k_prime = std::min(cfg.k_prime, pool.matchable_count());
    const auto harmonic_sets =
        matcher::select_harmonic_sets(pool, source.features, target, k_prime, cfg.k);
    auto render =
        synth::render_harmonics(target, synth::gather_harmonics(pool, harmonic_sets), cfg.audio);
    report.render_scale = render.scale;
    result.render = std::move(render.wave);
    report.timings.synthesis_ms = ms_since(start);
  }

  report.timings.total_ms = ms_since(total_start);
  return result;
}

ExtractOutputs extract_files(const std::filesystem::path& wav, const std::string& prefix,
                             const EngineConfig& cfg) {
  cfg.validate();
  ExtractOutputs out;
  const Waveform raw = io::read_wav(wav);
  out.input_rate = raw.sample_rate;
  const Waveform wave = conform(raw, cfg.audio, &out.resampled);
  const Analysis a = analyze(wave, cfg);
  out.frames = a.features.frame_count();
  out.features = prefix + ".feat.ksvc";
  out.pitch = prefix + ".f0.ksvc";
  out.harmonics = prefix + ".harm.ksvc";
  io::write_features(out.features, a.features, cfg.audio);
  io::write_pitch(out.pitch, a.pitch, cfg.audio);
  io::write_harmonics(out.harmonics, a.harmonics, cfg.audio);
  return out;
}

ConvertOutputs convert_files(const ConvertRequest& request) {
  const EngineConfig& cfg = request.config;
  cfg.validate();
  if (request.references.empty()) {
    throw ValidationError("at least one reference utterance is required");
  }
  const bool external = !request.external_features.empty();
  if (external && request.external_features.size() != request.references.size() + 1) {
    throw ValidationError("--features needs one file for the source plus one per reference (" +
                          std::to_string(request.references.size() + 1) + "), got " +
                          std::to_string(request.external_features.size()));
  }

  const auto start = Clock::now();
  auto load = [&](const std::filesystem::path& path, std::size_t slot) {
    Analysis a = analyze(conform(io::read_wav(path), cfg.audio), cfg);
    if (external) {
      io::KsvcHeader header;
      FeatureSequence feats = io::read_features(request.external_features[slot], &header);
      if (header.hop_size != static_cast<std::uint32_t>(cfg.audio.hop_size) ||
          header.sample_rate != static_cast<std::uint32_t>(cfg.audio.sample_rate)) {
        throw ValidationError(request.external_features[slot].string() +
                              ": frame grid does not match the engine's sample_rate/hop_size");
      }
      adopt_external_features(a, std::move(feats));
    }
    return a;
  };

  const Analysis source = load(request.source, 0);
  std::vector<Analysis> refs;
  refs.reserve(request.references.size());
  for (std::size_t i = 0; i < request.references.size(); ++i) {
    refs.push_back(load(request.references[i], i + 1));
    if (refs.back().features.dim() != source.features.dim()) {
      throw ValidationError("reference " + request.references[i].string() +
                            " feature dimension does not match the source");
    }
  }
  const double analysis_ms = ms_since(start);

  ConversionResult result = convert(source, refs, cfg);
  result.report.feature_space = external ? "external" : "mel";
  result.report.timings.analysis_ms = analysis_ms;
  result.report.timings.total_ms += analysis_ms;

  std::filesystem::create_directories(request.out_dir);
  ConvertOutputs out;
  out.features = request.out_dir / "out.feat.ksvc";
  io::write_features(out.features, result.features, cfg.audio);
  if (result.render) {
    out.render = request.out_dir / "out.harmonic.wav";
    io::write_wav(*out.render, *result.render, io::WavEncoding::kFloat32);
  }
  out.report = request.out_dir / "report.json";
  std::ofstream rep(out.report);
  if (!rep) throw IoError("cannot write " + out.report.string());
  rep << report_to_json(result.report) << '\n';
  out.summary = std::move(result.report);
  return out;
}

}  // namespace ksvc
