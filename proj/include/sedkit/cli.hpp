#pragma once
// Command implementations behind the sedkit binary: build-graph, train,
// eval, synth, gradcheck and features. Each returns a process exit code;
// diagnostics go to the error stream, data goes to files.

#include <sedkit/config.hpp>
#include <sedkit/dataset.hpp>
#include <sedkit/event_graph.hpp>
#include <sedkit/metrics.hpp>
#include <sedkit/model.hpp>
#include <sedkit/postprocess.hpp>
#include <sedkit/training.hpp>
#include <sedkit/verify.hpp>

#include <json.hpp>

#include <chrono>
#include <ctime>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sedkit::cli {

inline std::uint64_t fnv1a_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("hash: cannot open '" + path + "'");
  std::uint64_t h = 1469598103934665603ull;
  char buf[4096];
  while (in.read(buf, sizeof buf) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 1099511628211ull;
    }
    if (!in) break;
  }
  return h;
}

inline std::string timestamp_utc() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  char buf[32];
  std::tm tm_utc{};
  gmtime_r(&t, &tm_utc);
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  return buf;
}

// ---------------------------------------------------------------------------
// Dataset preparation shared by train and eval
// ---------------------------------------------------------------------------

struct PreparedDataset {
  EventVocabulary vocab;
  std::vector<TrainClip> clips;        // features + rolls for training
  std::vector<ClipEvents> references;  // ground truth for metrics
  double frame_shift = 0.020;
};

inline PreparedDataset prepare_dataset(const std::string& annotation_path, std::size_t feature_bands,
                                       const EventVocabulary* fixed_vocab = nullptr) {
  PreparedDataset out;
  auto loaded = load_dataset(annotation_path);
  if (fixed_vocab)
    out.vocab = *fixed_vocab;
  else {
    std::vector<AnnotatedClip> infos;
    for (const auto& lc : loaded) infos.push_back(lc.info);
    out.vocab = vocabulary_of(infos);
  }

  FeatureConfig fcfg;
  fcfg.mel_bands = feature_bands;
  for (auto& lc : loaded) {
    TrainClip clip;
    clip.id = lc.info.audio_path;
    clip.scene = lc.info.scene_label;
    const FeatureMap map = extract_features(lc.audio, fcfg);
    clip.features = feature_tensor(map);
    clip.roll = to_event_roll(lc.info.events, lc.info.duration, lc.audio.sample_rate, out.vocab,
                              fcfg.frame_length, fcfg.frame_shift);
    out.clips.push_back(std::move(clip));
    out.references.push_back(
        ClipEvents{lc.info.audio_path, lc.info.scene_label, lc.info.duration, lc.info.events});
  }
  return out;
}

// ---------------------------------------------------------------------------
// build-graph
// ---------------------------------------------------------------------------

inline int run_build_graph(const std::string& annotations, const std::string& out_path,
                           std::ostream& err = std::cerr) {
  try {
    const auto clips = parse_annotations(annotations);
    std::vector<EventList> lists;
    for (const auto& c : clips) lists.push_back(c.events);
    const EventVocabulary vocab = EventVocabulary::from_events(lists);

    const AdjacencyMatrix counts = count_cooccurrence(lists, vocab);
    double max_count = 0.0;
    std::size_t edges = 0;
    for (std::size_t i = 0; i < counts.m; ++i)
      for (std::size_t j = i + 1; j < counts.m; ++j)
        if (counts.at(i, j) > 0.0) {
          ++edges;
          max_count = std::max(max_count, counts.at(i, j));
        }
    const AdjacencyMatrix adjacency = normalize(counts);
    write_graph_file(out_path, vocab, adjacency);

    err << "build-graph: M=" << vocab.size() << " edges=" << edges << " max_count=" << max_count << "\n";
    if (edges == 0) err << "build-graph: warning: no co-occurring events, adjacency is all zero\n";
    return 0;
  } catch (const std::exception& e) {
    err << "build-graph: error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainCommand {
  RunConfig config;
  std::string dataset_tsv;
  std::optional<std::string> graph_path;
  std::string out_checkpoint;
  std::optional<std::string> loss_log_path;
  std::optional<std::string> manifest_path;
};

inline int run_train(const TrainCommand& cmd, std::ostream& err = std::cerr) {
  const std::string started = timestamp_utc();
  try {
    cmd.config.train.validate();
    if (cmd.config.train.glr_enabled && !cmd.graph_path) {
      err << "train: error: glr_enabled requires --graph\n";
      return 1;
    }

    std::optional<EventGraph> graph;
    if (cmd.graph_path) graph = read_graph_file(*cmd.graph_path);

    if (graph) {
      // the dataset may not contain labels outside the graph vocabulary;
      // checked before feature extraction so the failure is immediate
      std::vector<AnnotatedClip> infos = parse_annotations(cmd.dataset_tsv);
      for (const auto& clip : infos)
        for (const auto& e : clip.events)
          if (!graph->vocab.find(e.label)) {
            err << "train: error: dataset label '" << e.label << "' missing from graph vocabulary\n";
            return 1;
          }
    }

    PreparedDataset dataset =
        prepare_dataset(cmd.dataset_tsv, cmd.config.model.input_bands, graph ? &graph->vocab : nullptr);

    ModelConfig model_cfg = cmd.config.model;
    model_cfg.num_events = dataset.vocab.size();

    std::optional<GraphLaplacian> lap;
    if (graph) lap = laplacian(graph->adjacency);

    TrainResult result =
        train(dataset.clips, lap ? &*lap : nullptr, model_cfg, cmd.config.train);
    save_checkpoint(cmd.out_checkpoint, model_cfg, dataset.vocab, result.params);
    if (cmd.loss_log_path) write_loss_log(*cmd.loss_log_path, result.log);

    if (cmd.manifest_path) {
      nlohmann::json manifest;
      manifest["command"] = "train";
      manifest["config"] = config_snapshot(cmd.config);
      manifest["seed"] = cmd.config.train.seed;
      manifest["dataset"] = {{"path", cmd.dataset_tsv},
                             {"hash", fnv1a_file(cmd.dataset_tsv)}};
      if (cmd.graph_path)
        manifest["graph"] = {{"path", *cmd.graph_path}, {"hash", fnv1a_file(*cmd.graph_path)}};
      manifest["checkpoint"] = cmd.out_checkpoint;
      if (cmd.loss_log_path) manifest["loss_log"] = *cmd.loss_log_path;
      manifest["started_at"] = started;
      manifest["finished_at"] = timestamp_utc();
      std::ofstream out(*cmd.manifest_path);
      out << manifest.dump(2) << "\n";
    }

    err << "train: " << dataset.clips.size() << " clips, " << result.log.size() << " steps, final total "
        << (result.log.empty() ? 0.0 : result.log.back().total) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "train: error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// eval
// ---------------------------------------------------------------------------

struct EvalCommand {
  std::string checkpoint_path;
  std::string dataset_tsv;
  ThresholdConfig threshold;
  std::string report_path;
  std::optional<std::string> manifest_path;
};

inline int run_eval(const EvalCommand& cmd, std::ostream& err = std::cerr) {
  const std::string started = timestamp_utc();
  try {
    cmd.threshold.validate();
    Checkpoint ck = load_checkpoint(cmd.checkpoint_path);

    {
      std::vector<AnnotatedClip> infos = parse_annotations(cmd.dataset_tsv);
      for (const auto& clip : infos)
        for (const auto& e : clip.events)
          if (!ck.vocab.find(e.label)) {
            err << "eval: error: dataset label '" << e.label << "' missing from checkpoint vocabulary\n";
            return 1;
          }
    }

    PreparedDataset dataset = prepare_dataset(cmd.dataset_tsv, ck.config.input_bands, &ck.vocab);

    if (dataset.clips.empty()) {
      std::ofstream out(cmd.report_path);
      out << "section,name,f1_percent,error_rate,tp,fp,fn,substitutions,deletions,insertions,n_ref\n";
      out << "overall,no_clips,,,,,,,,,\n";
      err << "eval: no clips in dataset, wrote empty report\n";
      return 0;
    }

    std::vector<ClipEvents> hypotheses;
    for (const auto& clip : dataset.clips) {
      Tensor y = model_forward(clip.features, ck.config, ck.params);
      const ActivationMatrix activation = to_activation(y);
      const auto theta = adaptive_threshold(activation, cmd.threshold);
      const EventRoll roll = binarize(activation, theta, dataset.frame_shift);
      EventList events = decode(roll, ck.vocab, cmd.threshold.min_duration);
      ClipEvents hyp;
      hyp.id = clip.id;
      hyp.scene = clip.scene;
      hyp.events = std::move(events);
      hypotheses.push_back(std::move(hyp));
    }
    for (std::size_t i = 0; i < hypotheses.size(); ++i)
      hypotheses[i].duration = dataset.references[i].duration;

    const EvalResult result = evaluate(dataset.references, hypotheses, ck.vocab);
    const auto per_event = evaluate_per_event(dataset.references, hypotheses, ck.vocab);
    write_report_csv(cmd.report_path, result, per_event);

    if (cmd.manifest_path) {
      nlohmann::json manifest;
      manifest["command"] = "eval";
      manifest["checkpoint"] = {{"path", cmd.checkpoint_path}, {"hash", fnv1a_file(cmd.checkpoint_path)}};
      manifest["dataset"] = {{"path", cmd.dataset_tsv}, {"hash", fnv1a_file(cmd.dataset_tsv)}};
      manifest["report"] = cmd.report_path;
      manifest["started_at"] = started;
      manifest["finished_at"] = timestamp_utc();
      std::ofstream out(*cmd.manifest_path);
      out << manifest.dump(2) << "\n";
    }

    err << "eval: micro F1 " << result.f1 << "%";
    if (result.er) err << ", ER " << *result.er;
    err << " over " << dataset.clips.size() << " clips\n";
    return 0;
  } catch (const std::exception& e) {
    err << "eval: error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// gradcheck
// ---------------------------------------------------------------------------

inline int run_gradcheck(bool inject_fault = false, std::ostream& err = std::cerr) {
  try {
    detail::sigmoid_backward_scale() = inject_fault ? 1.02 : 1.0;
    const auto results = gradcheck_toy_suite();
    detail::sigmoid_backward_scale() = 1.0;

    bool all_pass = true;
    for (const auto& r : results) {
      err << "gradcheck: alpha=" << r.alpha << " max_rel_error=" << r.max_rel_error << " worst="
          << r.worst_param << " -> " << (r.pass ? "pass" : "FAIL") << "\n";
      all_pass = all_pass && r.pass;
    }
    return all_pass ? 0 : 1;
  } catch (const std::exception& e) {
    detail::sigmoid_backward_scale() = 1.0;
    err << "gradcheck: error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

inline SynthSpec parse_synth_spec(const KeyValues& kv) {
  SynthSpec spec;
  std::size_t num_labels = 0;
  double pair_prob = 0.9;
  std::string pair_text, label_text, template_text, scene_text, partition_text;
  for (const auto& [key, value] : kv) {
    if (key == "labels")
      label_text = value;
    else if (key == "num_labels")
      num_labels = static_cast<std::size_t>(detail::kv_u64(key, value));
    else if (key == "pairs")
      pair_text = value;
    else if (key == "pair_prob")
      pair_prob = detail::kv_double(key, value);
    else if (key == "templates")
      template_text = value;
    else if (key == "scenes")
      scene_text = value;
    else if (key == "scene_partition")
      partition_text = value;
    else if (key == "shared_event_duration")
      spec.shared_event_duration = detail::kv_bool(key, value);
    else if (key == "extra_events_min")
      spec.extra_events_min = static_cast<std::size_t>(detail::kv_u64(key, value));
    else if (key == "extra_events_max")
      spec.extra_events_max = static_cast<std::size_t>(detail::kv_u64(key, value));
    else if (key == "event_duration_min")
      spec.event_duration_min = detail::kv_double(key, value);
    else if (key == "event_duration_max")
      spec.event_duration_max = detail::kv_double(key, value);
    else if (key == "pair_time_jitter")
      spec.pair_time_jitter = detail::kv_double(key, value);
    else if (key == "clip_duration")
      spec.clip_duration = detail::kv_double(key, value);
    else if (key == "sample_rate")
      spec.sample_rate = static_cast<unsigned>(detail::kv_u64(key, value));
    else if (key == "event_amplitude")
      spec.event_amplitude = detail::kv_double(key, value);
    else if (key == "noise_floor")
      spec.noise_floor = detail::kv_double(key, value);
    else if (key == "seed")
      spec.seed = detail::kv_u64(key, value);
    else if (key == "clips")
      ;  // consumed by the caller
    else
      throw std::runtime_error("synth spec: unknown key '" + key + "'");
  }

  if (!label_text.empty()) {
    std::stringstream ss(label_text);
    std::string tok;
    std::vector<std::string> labels;
    while (std::getline(ss, tok, ',')) labels.push_back(tok);
    num_labels = labels.size();
    SynthSpec base = SynthSpec::basic(num_labels, pair_prob, spec.seed);
    base.labels = labels;
    std::swap(spec.labels, base.labels);
    spec.templates = base.templates;
    spec.pairs = base.pairs;
  } else {
    if (num_labels == 0) num_labels = 6;
    SynthSpec base = SynthSpec::basic(num_labels, pair_prob, spec.seed);
    spec.labels = base.labels;
    spec.templates = base.templates;
    spec.pairs = base.pairs;
  }

  if (!pair_text.empty()) {
    spec.pairs.clear();
    std::stringstream ss(pair_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      SynthPair p;
      if (std::sscanf(tok.c_str(), "%zu:%zu:%lf", &p.a, &p.b, &p.prob) != 3)
        throw std::runtime_error("synth spec: bad pair '" + tok + "', expected a:b:prob");
      spec.pairs.push_back(p);
    }
  }

  if (!template_text.empty()) {
    spec.templates.clear();
    std::stringstream ss(template_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      SynthTemplate t;
      double lo = 0.0, hi = 0.0;
      if (std::sscanf(tok.c_str(), "tone:%lf", &lo) == 1) {
        t.kind = SynthTemplate::Kind::Tone;
        t.freq_lo = t.freq_hi = lo;
      } else if (std::sscanf(tok.c_str(), "noise:%lf:%lf", &lo, &hi) == 2) {
        t.kind = SynthTemplate::Kind::NoiseBand;
        t.freq_lo = lo;
        t.freq_hi = hi;
      } else {
        throw std::runtime_error("synth spec: bad template '" + tok + "'");
      }
      spec.templates.push_back(t);
    }
  }

  if (!scene_text.empty()) {
    spec.scenes.clear();
    std::stringstream ss(scene_text);
    std::string tok;
    while (std::getline(ss, tok, ',')) spec.scenes.push_back(tok);
  }

  // scene_partition = name:pairIds:extraLabels;... with '+'-separated
  // index lists, e.g. "sceneA:0:4;sceneB:1:5"
  if (!partition_text.empty()) {
    const auto parse_ids = [](const std::string& text) {
      std::vector<std::size_t> ids;
      std::stringstream ss(text);
      std::string tok;
      while (std::getline(ss, tok, '+'))
        if (!tok.empty()) ids.push_back(static_cast<std::size_t>(detail::kv_u64("scene_partition", tok)));
      return ids;
    };
    std::stringstream ss(partition_text);
    std::string scene_tok;
    while (std::getline(ss, scene_tok, ';')) {
      const auto c1 = scene_tok.find(':');
      const auto c2 = scene_tok.find(':', c1 == std::string::npos ? c1 : c1 + 1);
      if (c1 == std::string::npos || c2 == std::string::npos)
        throw std::runtime_error("synth spec: bad scene '" + scene_tok + "', expected name:pairs:extras");
      SynthScene scene;
      scene.name = scene_tok.substr(0, c1);
      scene.pair_ids = parse_ids(scene_tok.substr(c1 + 1, c2 - c1 - 1));
      scene.extra_labels = parse_ids(scene_tok.substr(c2 + 1));
      spec.scene_partition.push_back(std::move(scene));
    }
  }
  return spec;
}

inline int run_synth(const KeyValues& kv, std::size_t n_clips, const std::string& out_dir,
                     std::ostream& err = std::cerr) {
  try {
    const SynthSpec spec = parse_synth_spec(kv);
    const auto clips = synth_generate(spec, n_clips, out_dir);

    EventVocabulary vocab(spec.labels);
    std::vector<EventList> lists;
    for (const auto& c : clips) lists.push_back(c.events);
    const AdjacencyMatrix counts = count_cooccurrence(lists, vocab);
    err << "synth: wrote " << clips.size() << " clips to " << out_dir << "\n";
    for (const auto& p : spec.pairs)
      err << "synth: pair " << spec.labels[p.a] << "/" << spec.labels[p.b] << " target " << p.prob
          << " realized " << counts.at(p.a, p.b) / static_cast<double>(clips.size()) << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "synth: error: " << e.what() << "\n";
    return 1;
  }
}

// ---------------------------------------------------------------------------
// features
// ---------------------------------------------------------------------------

inline int run_features(const std::string& wav_path, const std::string& out_path,
                        std::size_t mel_bands = 64, std::ostream& err = std::cerr) {
  try {
    const AudioClip clip = read_wav(wav_path);
    FeatureConfig cfg;
    cfg.mel_bands = mel_bands;
    const FeatureMap map = extract_features(clip, cfg);
    write_feature_file(out_path, map);
    err << "features: " << map.bands << " bands x " << map.frames << " frames -> " << out_path << "\n";
    return 0;
  } catch (const std::exception& e) {
    err << "features: error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace sedkit::cli
