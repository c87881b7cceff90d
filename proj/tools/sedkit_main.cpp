// sedkit command line: build-graph, train, eval, synth, gradcheck,
// features. Configuration keys can come from a key=value file (--config)
// and be overridden per key on the command line (--<key> <value>).

#include <sedkit/cli.hpp>

#include <algorithm>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr const char* kUsage = R"(usage: sedkit <command> [options]

commands:
  build-graph  --annotations FILE --out FILE
               Count clip-level event co-occurrences and write the
               normalized adjacency graph file.
  train        --dataset FILE --out FILE [--config FILE] [--graph FILE]
               [--loss-log FILE] [--manifest FILE] [--<key> VALUE ...]
               Train the CNN-BiGRU model; requires --graph when
               glr_enabled=true (the default).
  eval         --checkpoint FILE --dataset FILE --report FILE
               [--config FILE] [--manifest FILE] [--<key> VALUE ...]
               Run detection and write segment-based metric reports.
  synth        --out DIR --clips N [--spec FILE] [--<key> VALUE ...]
               Generate a synthetic correlated-event dataset.
  gradcheck    [--inject-fault]
               Verify objective gradients against finite differences.
  features     --wav FILE --out FILE [--mel_bands N]
               Extract log mel-band energies to a binary feature file.

config keys (train/model/threshold): alpha epochs learning_rate beta1
beta2 epsilon batch_size seed glr_enabled input_bands conv_channels kernel
pool gru_units mode fixed_value adaptive_lambda floor ceiling min_duration

synth spec keys: labels num_labels pairs pair_prob templates scenes
extra_events_min extra_events_max event_duration_min event_duration_max
pair_time_jitter clip_duration sample_rate event_amplitude noise_floor
seed clips
)";

struct ParsedArgs {
  std::map<std::string, std::string> options;  // --key value
  std::vector<std::string> flags;              // bare --key
};

ParsedArgs parse_args(int argc, char** argv, int start, const std::vector<std::string>& bare_flags) {
  ParsedArgs out;
  for (int i = start; i < argc; ++i) {
    std::string arg = argv[i];
    if (arg.rfind("--", 0) != 0) throw std::runtime_error("unexpected argument '" + arg + "'");
    arg = arg.substr(2);
    if (std::find(bare_flags.begin(), bare_flags.end(), arg) != bare_flags.end()) {
      out.flags.push_back(arg);
      continue;
    }
    if (i + 1 >= argc) throw std::runtime_error("option '--" + arg + "' needs a value");
    out.options[arg] = argv[++i];
  }
  return out;
}

std::string take(std::map<std::string, std::string>& options, const std::string& key) {
  auto it = options.find(key);
  if (it == options.end()) throw std::runtime_error("missing required option '--" + key + "'");
  std::string v = it->second;
  options.erase(it);
  return v;
}

std::optional<std::string> take_optional(std::map<std::string, std::string>& options,
                                         const std::string& key) {
  auto it = options.find(key);
  if (it == options.end()) return std::nullopt;
  std::string v = it->second;
  options.erase(it);
  return v;
}

// Remaining --key value pairs are config overrides (CLI > file > default).
sedkit::RunConfig build_config(std::map<std::string, std::string>& options) {
  sedkit::KeyValues merged;
  if (auto file = take_optional(options, "config")) merged = sedkit::read_key_values(*file);
  for (const auto& [key, value] : options) merged[key] = value;
  options.clear();
  return sedkit::apply_config(merged);
}

int dispatch(int argc, char** argv) {
  const std::string command = argv[1];
  if (command == "--help" || command == "-h" || command == "help") {
    std::cout << kUsage;
    return 0;
  }

  if (command == "build-graph") {
    auto args = parse_args(argc, argv, 2, {});
    const std::string annotations = take(args.options, "annotations");
    const std::string out = take(args.options, "out");
    if (!args.options.empty())
      throw std::runtime_error("unknown option '--" + args.options.begin()->first + "'");
    return sedkit::cli::run_build_graph(annotations, out);
  }

  if (command == "train") {
    auto args = parse_args(argc, argv, 2, {});
    sedkit::cli::TrainCommand cmd;
    cmd.dataset_tsv = take(args.options, "dataset");
    cmd.out_checkpoint = take(args.options, "out");
    cmd.graph_path = take_optional(args.options, "graph");
    cmd.loss_log_path = take_optional(args.options, "loss-log");
    cmd.manifest_path = take_optional(args.options, "manifest");
    cmd.config = build_config(args.options);
    return sedkit::cli::run_train(cmd);
  }

  if (command == "eval") {
    auto args = parse_args(argc, argv, 2, {});
    sedkit::cli::EvalCommand cmd;
    cmd.checkpoint_path = take(args.options, "checkpoint");
    cmd.dataset_tsv = take(args.options, "dataset");
    cmd.report_path = take(args.options, "report");
    cmd.manifest_path = take_optional(args.options, "manifest");
    cmd.threshold = build_config(args.options).threshold;
    return sedkit::cli::run_eval(cmd);
  }

  if (command == "synth") {
    auto args = parse_args(argc, argv, 2, {});
    const std::string out_dir = take(args.options, "out");
    sedkit::KeyValues merged;
    if (auto file = take_optional(args.options, "spec")) merged = sedkit::read_key_values(*file);
    for (const auto& [key, value] : args.options) merged[key] = value;
    std::size_t clips = 100;
    if (auto it = merged.find("clips"); it != merged.end()) clips = std::stoull(it->second);
    return sedkit::cli::run_synth(merged, clips, out_dir);
  }

  if (command == "gradcheck") {
    auto args = parse_args(argc, argv, 2, {"inject-fault"});
    const bool fault =
        std::find(args.flags.begin(), args.flags.end(), "inject-fault") != args.flags.end();
    if (!args.options.empty())
      throw std::runtime_error("unknown option '--" + args.options.begin()->first + "'");
    return sedkit::cli::run_gradcheck(fault);
  }

  if (command == "features") {
    auto args = parse_args(argc, argv, 2, {});
    const std::string wav = take(args.options, "wav");
    const std::string out = take(args.options, "out");
    std::size_t bands = 64;
    if (auto b = take_optional(args.options, "mel_bands")) bands = std::stoull(*b);
    if (!args.options.empty())
      throw std::runtime_error("unknown option '--" + args.options.begin()->first + "'");
    return sedkit::cli::run_features(wav, out, bands);
  }

  std::cerr << "sedkit: unknown command '" << command << "'\n" << kUsage;
  return 2;
}

}  // namespace

int main(int argc, char** argv) {
  if (argc < 2) {
    std::cerr << kUsage;
    return 2;
  }
  try {
    return dispatch(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "sedkit: error: " << e.what() << "\n";
    return 2;
  }
}
