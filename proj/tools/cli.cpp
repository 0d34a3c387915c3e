#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "tife/anomaly.hpp"
#include "tife/attention_viz.hpp"
#include "tife/data.hpp"
#include "tife/training.hpp"

namespace tife::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct InputOptions {
  std::string path;
  std::string timestamp_column;
  std::string features;

  void attach(CLI::App* app) {
    app->add_option("--input,-i", path, "Input CSV (timestamp column + feature columns)")
        ->required()
        ->check(CLI::ExistingFile);
    app->add_option("--timestamp-column", timestamp_column,
                    "Timestamp column name (default: first column)");
    app->add_option("--features", features,
                    "Comma-separated feature columns (default: all other columns)");
  }

  TimeSeries load() const { return ingest_csv(path, timestamp_column, split_list(features)); }
};

struct GenerateOptions {
  std::string dataset;
  std::size_t hours = 8760;
  std::size_t weeks = 52;
  std::optional<std::size_t> swap_day;
  std::uint64_t seed = 0;
  std::string out;
};

struct TrainOptions {
  InputOptions input;
  std::size_t window = 168;
  std::size_t attention_latent = 32;
  std::size_t latent = 16;
  std::size_t batch = 128;
  std::size_t epochs = 200;
  std::size_t stride = 0;
  std::uint64_t seed = 0;
  double learning_rate = 1e-3;
  bool no_attention = false;
  bool no_shuffle = false;
  bool verbose = false;
  std::string model_out;
  std::string loss_out;
};

struct DetectOptions {
  InputOptions input;
  std::string model;
  std::size_t stride = 1;
  double k = 3.0;
  std::string aggregate = "mean";
  std::string out;
};

struct AttnOptions {
  InputOptions input;
  std::string model;
  std::optional<std::size_t> window;
  bool mean = false;
  std::size_t stride = 0;
  std::string prefix;
};

struct ReconstructOptions {
  InputOptions input;
  std::string model;
  std::size_t stride = 0;
  std::string out;
};

struct GradcheckOptions {
  std::size_t window = 8;
  std::size_t features = 2;
  std::size_t attention_latent = 4;
  std::size_t latent = 3;
  std::uint64_t seed = 0;
  double step = 1e-5;
  double tol = 1e-4;
  bool no_attention = false;
};

int cmd_generate(const GenerateOptions& o, std::ostream& out) {
  TimeSeries s;
  if (o.dataset == "data1") {
    s = build_data1(o.hours);
  } else {
    s = gen_data2(o.weeks, o.swap_day);
  }
  write_csv(s, o.out);
  out << "wrote " << s.length() << " rows x " << s.features() << " features to " << o.out << '\n';
  return kSuccess;
}

int cmd_train(const TrainOptions& o, std::ostream& out) {
  const TimeSeries raw = o.input.load();
  auto [scaled, params] = min_max_scale(raw);
  const std::size_t stride = o.stride == 0 ? o.window : o.stride;
  const Dataset data = make_windows(scaled, o.window, stride);

  TrainConfig cfg;
  cfg.batch_size = o.batch;
  cfg.epochs = o.epochs;
  cfg.seed = o.seed;
  cfg.window = o.window;
  cfg.attention_latent = o.attention_latent;
  cfg.latent = o.latent;
  cfg.adam.learning_rate = o.learning_rate;
  cfg.shuffle = !o.no_shuffle;

  EpochCallback progress;
  if (o.verbose) {
    progress = [&out](std::size_t epoch, double loss) {
      out << "epoch=" << epoch + 1 << " loss=" << fmt(loss) << '\n';
    };
  }
  TrainResult r = train(data, cfg, !o.no_attention, progress);
  r.model.scale = params;
  save_model(r.model, o.model_out);
  if (!o.loss_out.empty()) write_loss_csv(r.loss_history, o.loss_out);
  out << "windows=" << data.windows.size() << " parameters=" << parameter_count(r.model) << '\n';
  out << "final_loss=" << fmt(r.loss_history.back()) << '\n';
  return kSuccess;
}

TimeSeries load_for_model(const InputOptions& in, const TiFeAEModel& model) {
  const TimeSeries raw = in.load();
  if (raw.features() != model.dims.features) {
    throw ShapeError("input has N=" + std::to_string(raw.features()) + " features, model expects N=" +
                     std::to_string(model.dims.features));
  }
  return apply_scale(raw, model.scale);
}

int cmd_detect(const DetectOptions& o, std::ostream& out) {
  const TiFeAEModel model = load_model(o.model);
  const TimeSeries series = load_for_model(o.input, model);
  const Aggregation agg = o.aggregate == "max" ? Aggregation::max : Aggregation::mean;
  const AnomalyReport report = detect(model, series, o.stride, o.k, agg);
  write_report_csv(report, series, o.out);
  const auto worst = std::max_element(report.window_errors.begin(), report.window_errors.end());
  out << "threshold=" << fmt(report.threshold) << '\n';
  out << "max_window_start="
      << report.window_starts[static_cast<std::size_t>(worst - report.window_errors.begin())]
      << " max_window_error=" << fmt(*worst) << '\n';
  out << "flagged=" << report.flagged.size() << '\n';
  return kSuccess;
}

int cmd_attnmap(const AttnOptions& o, std::ostream& out, std::ostream& err) {
  const TiFeAEModel model = load_model(o.model);
  if (!model.has_attention()) {
    err << "error: model was trained without the attention stage\n";
    return kDataError;
  }
  const TimeSeries series = load_for_model(o.input, model);
  const Dataset data =
      make_windows(series, model.dims.window, o.stride == 0 ? model.dims.window : o.stride);

  AttentionMaps maps;
  if (o.mean) {
    std::vector<AttentionMaps> all;
    for (const auto& w : data.windows) all.push_back(attention_maps(w.matrix, *model.attention));
    maps = mean_maps(all);
  } else {
    const std::size_t index = o.window.value_or(0);
    if (index >= data.windows.size()) {
      err << "error: window index " << index << " out of range (" << data.windows.size()
          << " windows)\n";
      return kDataError;
    }
    maps = attention_maps(data.windows[index].matrix, *model.attention);
  }
  export_attention_csv(maps, o.prefix);
  export_heatmap(maps, o.prefix);
  out << "time_map=" << maps.time_map.rows() << "x" << maps.time_map.cols()
      << " feature_map=" << maps.feature_map.rows() << "x" << maps.feature_map.cols() << '\n';
  return kSuccess;
}

int cmd_reconstruct(const ReconstructOptions& o, std::ostream& out) {
  const TiFeAEModel model = load_model(o.model);
  const TimeSeries series = load_for_model(o.input, model);
  const Dataset data =
      make_windows(series, model.dims.window, o.stride == 0 ? model.dims.window : o.stride);
  const Matrix recon = inverse_scale(reconstruct_series(model, data), model.scale);
  const Matrix original = inverse_scale(series.values, model.scale);

  std::ofstream file(o.out);
  if (!file) throw DataError("cannot write " + o.out);
  file << "time_index,timestamp";
  for (const auto& name : series.names) file << ',' << name << "_original," << name << "_reconstructed";
  file << '\n';
  for (std::size_t i = 0; i < recon.rows(); ++i) {
    file << i << ',' << format_timestamp(series.time_at(i));
    for (std::size_t j = 0; j < recon.cols(); ++j) {
      file << ',' << fmt(original(i, j)) << ',' << fmt(recon(i, j));
    }
    file << '\n';
  }
  if (!file) throw DataError("write failed for " + o.out);
  out << "rows=" << recon.rows() << '\n';
  return kSuccess;
}

int cmd_gradcheck(const GradcheckOptions& o, std::ostream& out, std::ostream& err) {
  if (o.window * o.features > 64) {
    err << "error: gradcheck is limited to T*N <= 64 (got " << o.window * o.features << ")\n";
    return kUsageError;
  }
  const ModelDims dims{o.window, o.features, o.attention_latent, o.latent};
  const TiFeAEModel model = init_params(o.seed, dims, !o.no_attention);
  std::mt19937_64 rng(o.seed + 1);
  Matrix x(o.window, o.features);
  for (double& v : x.values()) v = static_cast<double>(rng() >> 11) * 0x1.0p-53;

  const GradCheckReport report = gradient_check(model, x, o.step, o.tol);
  for (const auto& b : report.blocks) {
    out << "block=" << b.block << " max_rel_error=" << fmt(b.max_relative_error) << ' '
        << (b.passed ? "pass" : "FAIL") << '\n';
  }
  out << (report.passed() ? "gradcheck passed" : "gradcheck failed") << '\n';
  return report.passed() ? kSuccess : kDataError;
}

// Config files hold `key=value` lines naming long options of the chosen
// subcommand. They are spliced in as `--key=value` right after the
// subcommand name, so any flag given on the command line wins.
std::vector<std::string> read_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open config file " + path);
  std::vector<std::string> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw DataError(path + ":" + std::to_string(number) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    out.push_back("--" + trim(line.substr(0, eq)) + "=" + trim(line.substr(eq + 1)));
  }
  return out;
}

std::vector<std::string> expand_config(const std::vector<std::string>& args) {
  std::vector<std::string> rest;
  std::string config;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) {
      config = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      config = args[i].substr(9);
    } else {
      rest.push_back(args[i]);
    }
  }
  if (config.empty() || rest.size() < 2) return rest;
  const auto extra = read_config(config);
  rest.insert(rest.begin() + 2, extra.begin(), extra.end());
  return rest;
}

void add_config_option(CLI::App* app) {
  // Consumed by expand_config before parsing; registered for --help only.
  static std::string unused;
  app->add_option("--config", unused, "key=value file of option defaults; flags override it");
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"TiFe attention autoencoder: synthetic data, training, anomaly detection"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  GenerateOptions gen;
  auto* g = app.add_subcommand("generate", "Write a synthetic dataset as CSV");
  add_config_option(g);
  g->add_option("dataset", gen.dataset, "data1 or data2")
      ->required()
      ->check(CLI::IsMember({"data1", "data2"}));
  g->add_option("--hours", gen.hours, "data1 length in hours (>= 168)")->capture_default_str();
  g->add_option("--weeks", gen.weeks, "data2 length in weeks (>= 4)")->capture_default_str();
  g->add_option("--swap-day", gen.swap_day, "data2: day index whose AC readings are exchanged");
  g->add_option("--seed", gen.seed, "Accepted for uniformity; generators are deterministic");
  g->add_option("--out,-o", gen.out, "Output CSV")->required();

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model on a CSV series");
  add_config_option(t);
  tr.input.attach(t);
  t->add_option("--T", tr.window, "Window length in hours")->capture_default_str();
  t->add_option("--da", tr.attention_latent, "Attention latent dimension")->capture_default_str();
  t->add_option("--l", tr.latent, "Encoder latent dimension")->capture_default_str();
  t->add_option("--batch", tr.batch, "Mini-batch size")->capture_default_str();
  t->add_option("--epochs", tr.epochs, "Training epochs")->capture_default_str();
  t->add_option("--stride", tr.stride, "Training window stride (default: T)");
  t->add_option("--seed", tr.seed, "Initialization and shuffle seed")->capture_default_str();
  t->add_option("--lr", tr.learning_rate, "Adam learning rate")->capture_default_str();
  t->add_flag("--no-attention", tr.no_attention, "Plain autoencoder (ablation baseline)");
  t->add_flag("--no-shuffle", tr.no_shuffle, "Keep window order fixed");
  t->add_flag("--verbose,-v", tr.verbose, "Print the loss after every epoch");
  t->add_option("--model,-m", tr.model_out, "Output model file")->required();
  t->add_option("--loss-csv", tr.loss_out, "Write epoch,loss rows here");

  DetectOptions de;
  auto* d = app.add_subcommand("detect", "Score a series and flag anomalous points");
  add_config_option(d);
  de.input.attach(d);
  d->add_option("--model,-m", de.model, "Model file")->required()->check(CLI::ExistingFile);
  d->add_option("--stride", de.stride, "Detection window stride")->capture_default_str();
  d->add_option("--k", de.k, "Threshold = mean + k*std of point errors")->capture_default_str();
  d->add_option("--aggregate", de.aggregate, "Overlap aggregation")
      ->check(CLI::IsMember({"mean", "max"}))
      ->capture_default_str();
  d->add_option("--out,-o", de.out, "Report CSV")->required();

  AttnOptions at;
  auto* a = app.add_subcommand("attnmap", "Export attention maps as CSV and PGM");
  add_config_option(a);
  at.input.attach(a);
  a->add_option("--model,-m", at.model, "Model file")->required()->check(CLI::ExistingFile);
  auto* win = a->add_option("--window", at.window, "Window index");
  auto* mean = a->add_flag("--mean", at.mean, "Average maps over all windows");
  win->excludes(mean);
  a->add_option("--stride", at.stride, "Window stride (default: T)");
  a->add_option("--out,-o", at.prefix, "Output path prefix")->required();

  ReconstructOptions re;
  auto* r = app.add_subcommand("reconstruct", "Write original vs reconstructed values");
  add_config_option(r);
  re.input.attach(r);
  r->add_option("--model,-m", re.model, "Model file")->required()->check(CLI::ExistingFile);
  r->add_option("--stride", re.stride, "Window stride (default: T)");
  r->add_option("--out,-o", re.out, "Output CSV")->required();

  GradcheckOptions gc;
  auto* c = app.add_subcommand("gradcheck", "Compare tape gradients with finite differences");
  add_config_option(c);
  c->add_option("--T", gc.window, "Window length")->capture_default_str();
  c->add_option("--N", gc.features, "Feature count")->capture_default_str();
  c->add_option("--da", gc.attention_latent, "Attention latent dimension")->capture_default_str();
  c->add_option("--l", gc.latent, "Encoder latent dimension")->capture_default_str();
  c->add_option("--seed", gc.seed, "Model and window seed")->capture_default_str();
  c->add_option("--step", gc.step, "Central difference step")->capture_default_str();
  c->add_option("--tol", gc.tol, "Relative tolerance")->capture_default_str();
  c->add_flag("--no-attention", gc.no_attention, "Check the plain autoencoder");

  std::vector<std::string> expanded;
  try {
    expanded = expand_config(args);
  } catch (const DataError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  }
  std::vector<const char*> argv;
  for (const auto& s : expanded) argv.push_back(s.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kSuccess : kUsageError;
  }

  try {
    if (*g) return cmd_generate(gen, out);
    if (*t) return cmd_train(tr, out);
    if (*d) return cmd_detect(de, out);
    if (*a) return cmd_attnmap(at, out, err);
    if (*r) return cmd_reconstruct(re, out);
    if (*c) return cmd_gradcheck(gc, out, err);
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kDataError;
  }
  return kUsageError;
}

}  // namespace tife::cli
