#include "cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "plot_png.hpp"
#include "vqmd/common/error.hpp"
#include "vqmd/eval/metrics.hpp"
#include "vqmd/eval/pca.hpp"
#include "vqmd/eval/probes.hpp"
#include "vqmd/eval/swap_protocol.hpp"
#include "vqmd/features/corpus_io.hpp"
#include "vqmd/train/config_io.hpp"
#include "vqmd/train/tensor_file.hpp"
#include "vqmd/train/trainer.hpp"
#include "vqmd/transform/corruption.hpp"
#include "vqmd/transform/latent_ops.hpp"
#include "vqmd/vq/losses.hpp"

namespace vqmd::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Raised for command-line misuse detected after parsing.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Flags {
  std::string config;
  std::string out;
  int64_t seed = 0;
  bool seed_given = false;
  std::vector<std::string> overrides;
  bool overwrite = false;
  bool deterministic = false;
  std::string data, model, vq;

  // command-specific
  std::string variable = "w";
  int64_t repeats = 5;
  int64_t recipients = 50;
  std::string region = "both";
  std::string variances = "0.05,0.1,0.25,0.5,1.0";
  int64_t n_sequences = 50;
  std::string label = "model";
  std::string kind = "mlr";
  std::string split = "person-dependent";
  bool adapt = false;
  std::string input;
};

size_t edit_distance(const std::string& a, const std::string& b) {
  std::vector<size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (size_t j = 1; j <= b.size(); ++j) {
      const size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
      // adjacent transposition
      if (i > 1 && j > 1 && a[i - 1] == b[j - 2] && a[i - 2] == b[j - 1]) cur[j] = std::min(cur[j], prev[j - 1]);
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

train::PipelineConfig load_config(const Flags& f) {
  std::optional<fs::path> file;
  if (!f.config.empty()) file = fs::path(f.config);
  std::optional<uint64_t> seed;
  if (f.seed_given) seed = static_cast<uint64_t>(f.seed);
  auto overrides = f.overrides;
  if (f.deterministic) overrides.push_back("train.deterministic=true");
  return train::load_pipeline_config(file, overrides, seed);
}

fs::path prepare_out(const Flags& f) {
  if (f.out.empty()) throw UsageError("--out is required");
  const fs::path out = fs::absolute(f.out).lexically_normal();
  for (const auto& input : {f.data, f.model, f.vq, f.input, f.config}) {
    if (input.empty()) continue;
    const auto in = fs::absolute(input).lexically_normal();
    const auto rel = in.lexically_relative(out);
    if (!rel.empty() && *rel.begin() != "..") {
      throw UsageError("--out " + f.out + " would contain the input " + input);
    }
  }
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (!f.overwrite) {
      throw ConfigError("output directory " + out.string() + " is not empty; pass --overwrite to replace it");
    }
    fs::remove_all(out);
  }
  fs::create_directories(out);
  return out;
}

std::string require_path(const std::string& value, const char* flag) {
  if (value.empty()) throw UsageError(std::string(flag) + " is required for this command");
  return value;
}

void write_text(const fs::path& path, const std::string& text) { train::write_file_atomic(path, text); }

void write_loss_csv(const fs::path& path, const std::vector<train::LossRecord>& log) {
  std::ostringstream s;
  s << std::setprecision(10) << "step,total";
  if (!log.empty()) {
    for (const auto& [name, _] : log.front().terms) s << ',' << name;
  }
  s << '\n';
  for (const auto& r : log) {
    s << r.step << ',' << r.total;
    for (const auto& [_, v] : r.terms) s << ',' << v;
    s << '\n';
  }
  write_text(path, s.str());
}

json effective_train(const train::TrainConfig& t) {
  json j = t;
  j["learning_rate"] = t.effective_learning_rate();
  j["batch_size"] = t.effective_batch_size();
  j["max_steps"] = t.effective_max_steps();
  j["adam"] = {{"beta1", 0.9}, {"beta2", 0.999}, {"eps", 1e-8}};
  return j;
}

fs::path checkpoint_dir(const std::string& path) {
  const fs::path p(path);
  if (fs::exists(p / "manifest.json")) return p;
  if (fs::exists(p / "checkpoint" / "manifest.json")) return p / "checkpoint";
  throw ConfigError("no checkpoint found at " + p.string());
}

struct StageOne {
  vq::VQVAE audio{nullptr};
  vq::VQVAE visual{nullptr};
};

StageOne load_vq(const std::string& dir) {
  const fs::path root(dir);
  for (const auto* name : {"audio", "visual"}) {
    if (!fs::exists(root / name / "manifest.json")) {
      throw ConfigError("stage-1 checkpoint missing: " + (root / name).string());
    }
  }
  return {train::vq_from_checkpoint(train::load_checkpoint(root / "audio")),
          train::vq_from_checkpoint(train::load_checkpoint(root / "visual"))};
}

bool is_raw(const features::SyntheticCorpus& c) { return c.spec.mode == features::SyntheticMode::RawLike; }

/// Sequences in the model's observation space (stage-1 codes for raw-like corpora).
std::vector<features::AVFeatureSequence> model_space(const features::SyntheticCorpus& corpus, StageOne* vq) {
  if (!is_raw(corpus)) return corpus.sequences;
  if (vq == nullptr) throw ConfigError("a raw-like corpus needs stage-1 checkpoints (--vq)");
  return train::encode_with_vq(corpus.sequences, vq->audio, vq->visual);
}

torch::Tensor image_stack(const torch::Tensor& rows) {
  constexpr int64_t side = features::SyntheticFactorSpec::kImageSide;
  return rows.reshape({rows.size(0), 1, side, side});
}

std::vector<double> parse_doubles(const std::string& list) {
  std::vector<double> out;
  std::stringstream ss(list);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw UsageError("not a number: '" + item + "'");
    }
  }
  if (out.empty()) throw UsageError("empty list of numbers");
  return out;
}

void write_summary(const fs::path& path, const std::vector<eval::MetricRow>& rows) {
  std::map<std::pair<std::string, std::string>, std::vector<double>> groups;
  for (const auto& r : rows) groups[{r.condition, r.metric}].push_back(r.value);
  json out = json::array();
  for (const auto& [key, values] : groups) {
    const auto s = eval::summarize(values);
    out.push_back({{"condition", key.first}, {"metric", key.second}, {"mean", s.mean}, {"std", s.std}, {"count", s.count}});
  }
  write_text(path, out.dump(2) + "\n");
}

// ---- commands ----

int cmd_gen_data(const Flags& f, std::ostream& out) {
  const auto cfg = load_config(f);
  const auto dir = prepare_out(f);
  const auto corpus = features::generate_synthetic(cfg.corpus);
  features::save_corpus(corpus, dir);
  out << "wrote " << corpus.sequences.size() << " sequences to " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train_vq(const Flags& f, std::ostream& out) {
  auto cfg = load_config(f);
  const auto corpus = features::load_corpus(require_path(f.data, "--data"));
  if (!is_raw(corpus)) throw ConfigError("train-vq needs a raw-like corpus; feature corpora bypass stage 1");
  cfg.corpus = corpus.spec;
  cfg.train.stage = 1;
  cfg.validate();
  const auto dir = prepare_out(f);
  for (const auto* cfg_vq : {&cfg.vq_audio, &cfg.vq_visual}) {
    const auto name = vq::to_string(cfg_vq->modality);
    train::TrainHooks hooks;
    hooks.divergence_checkpoint = dir / (name + "-last-good");
    auto run = train::train_stage1(*cfg_vq, train::stack_frames(corpus.sequences, cfg_vq->modality), cfg.train, hooks);
    auto ckpt = train::vq_checkpoint(run.model, static_cast<int64_t>(run.log.size()), run.log);
    ckpt.metrics["train"] = effective_train(cfg.train);
    train::save_checkpoint(ckpt, dir / name);
    write_loss_csv(dir / ("loss_" + name + ".csv"), run.log);
    out << name << ": final loss " << (run.log.empty() ? 0.0 : run.log.back().total) << "\n";
  }
  return kExitOk;
}

int cmd_train_mdvae(const Flags& f, std::ostream& out) {
  auto cfg = load_config(f);
  const auto corpus = features::load_corpus(require_path(f.data, "--data"));
  cfg.corpus = corpus.spec;
  cfg.train.stage = 2;
  std::optional<StageOne> vq;
  if (is_raw(corpus)) {
    if (f.vq.empty()) throw ConfigError("a raw-like corpus needs stage-1 checkpoints (--vq)");
    vq = load_vq(f.vq);
    cfg.vq_audio = vq->audio->config();
    cfg.vq_visual = vq->visual->config();
  }
  cfg.resolve();
  cfg.validate();
  const auto dir = prepare_out(f);
  const auto seqs = model_space(corpus, vq ? &*vq : nullptr);
  const auto data = train::stack_sequences(seqs);
  train::TrainHooks hooks;
  hooks.divergence_checkpoint = dir / "last-good";
  auto run = train::train_stage2(cfg.model, data, cfg.train, hooks, cfg.train.eval_every > 0 ? &data : nullptr);
  auto ckpt = train::mdvae_checkpoint(run.model, static_cast<int64_t>(run.log.size()), run.log);
  ckpt.metrics["train"] = effective_train(cfg.train);
  ckpt.metrics["validation"] = train::to_json(run.validation);
  train::save_checkpoint(ckpt, dir / "checkpoint");
  write_loss_csv(dir / "loss.csv", run.log);
  out << "final loss " << (run.log.empty() ? 0.0 : run.log.back().total) << "\n";
  return kExitOk;
}

int cmd_resynth(const Flags& f, std::ostream& out) {
  const auto corpus = features::load_corpus(require_path(f.data, "--data"));
  auto model = train::mdvae_from_checkpoint(train::load_checkpoint(checkpoint_dir(require_path(f.model, "--model"))));
  std::optional<StageOne> vq;
  if (is_raw(corpus)) vq = load_vq(require_path(f.vq, "--vq"));
  const auto dir = prepare_out(f);
  const auto seqs = model_space(corpus, vq ? &*vq : nullptr);
  const auto& mc = model->config();

  std::vector<eval::MetricRow> rows;
  for (size_t i = 0; i < seqs.size(); ++i) {
    const auto& s = seqs[i];
    const auto bundle = transform::analyze(model, s.x_a, s.x_v);
    if (!vq) {
      const auto rec = transform::resynthesize_features(model, bundle);
      if (mc.has_audio()) rows.push_back({s.id, "feature", "mse_a", (rec.x_a - s.x_a).pow(2).mean().item<double>()});
      if (mc.has_visual()) rows.push_back({s.id, "feature", "mse_v", (rec.x_v - s.x_v).pow(2).mean().item<double>()});
      continue;
    }
    const auto raw = transform::resynthesize_raw(model, bundle, &vq->audio, &vq->visual);
    const auto& orig = corpus.sequences[i];
    if (raw.images.defined()) {
      const auto m = eval::visual_metrics(image_stack(orig.x_v), raw.images);
      rows.push_back({s.id, "raw", "mse", m.mse});
      rows.push_back({s.id, "raw", "psnr", m.psnr});
      rows.push_back({s.id, "raw", "scc", m.scc});
      rows.push_back({s.id, "raw", "ssim", m.ssim});
    }
    if (raw.spectra.defined()) {
      double sdr = 0.0;
      for (int64_t t = 0; t < orig.x_a.size(0); ++t) sdr += eval::sisdr(orig.x_a[t], raw.spectra[t]);
      rows.push_back({s.id, "raw", "sisdr_spectrogram", sdr / static_cast<double>(orig.x_a.size(0))});
      rows.push_back({s.id, "raw", "is_divergence",
                      vq::is_divergence(orig.x_a, raw.spectra) / static_cast<double>(orig.x_a.numel())});
    }
  }
  eval::write_metrics_csv(dir / "metrics.csv", rows);
  write_summary(dir / "summary.json", rows);
  out << "resynthesized " << seqs.size() << " sequences\n";
  return kExitOk;
}

int cmd_swap(const Flags& f, std::ostream& out) {
  const auto corpus = features::load_corpus(require_path(f.data, "--data"));
  auto model = train::mdvae_from_checkpoint(train::load_checkpoint(checkpoint_dir(require_path(f.model, "--model"))));
  std::optional<StageOne> vq;
  if (is_raw(corpus)) vq = load_vq(require_path(f.vq, "--vq"));
  const auto variable = transform::latent_from_string(f.variable);
  const auto dir = prepare_out(f);
  const auto seqs = model_space(corpus, vq ? &*vq : nullptr);
  const auto extractor = eval::fit_factor_extractor(seqs);
  eval::SwapProtocolOptions opts;
  opts.n_repeats = f.repeats;
  opts.n_recipients = f.recipients;
  opts.seed = f.seed_given ? static_cast<uint64_t>(f.seed) : 0;
  const auto scores = eval::swap_protocol(model, seqs, variable, extractor, opts);

  std::vector<eval::MetricRow> rows;
  json report = json::array();
  const auto condition = "swap-" + transform::to_string(variable);
  for (const auto& s : scores) {
    rows.push_back({"all", condition, s.name + "_pcc_source", s.pcc_source});
    rows.push_back({"all", condition, s.name + "_mae_source", s.mae_source});
    rows.push_back({"all", condition, s.name + "_pcc_recipient", s.pcc_recipient});
    rows.push_back({"all", condition, s.name + "_mae_recipient", s.mae_recipient});
    report.push_back({{"attribute", s.name},
                      {"pcc_source", s.pcc_source},
                      {"mae_source", s.mae_source},
                      {"pcc_recipient", s.pcc_recipient},
                      {"mae_recipient", s.mae_recipient}});
    out << s.name << ": pcc(source) " << s.pcc_source << ", pcc(recipient) " << s.pcc_recipient << "\n";
  }
  eval::write_metrics_csv(dir / "metrics.csv", rows);
  write_text(dir / "swap.json", json{{"variable", transform::to_string(variable)}, {"attributes", report}}.dump(2) + "\n");
  return kExitOk;
}

int cmd_denoise(const Flags& f, std::ostream& out) {
  const auto corpus = features::load_corpus(require_path(f.data, "--data"));
  if (!is_raw(corpus)) throw ConfigError("denoise needs a raw-like corpus");
  auto model = train::mdvae_from_checkpoint(train::load_checkpoint(checkpoint_dir(require_path(f.model, "--model"))));
  auto vq = load_vq(require_path(f.vq, "--vq"));
  const auto variances = parse_doubles(f.variances);
  std::vector<transform::RegionBox> regions;
  constexpr int64_t side = features::SyntheticFactorSpec::kImageSide;
  if (f.region == "mouth" || f.region == "both") regions.push_back(transform::RegionBox::mouth(side, side));
  if (f.region == "eyes" || f.region == "both") regions.push_back(transform::RegionBox::eyes(side, side));
  if (regions.empty()) throw UsageError("--region must be mouth, eyes or both");
  if (corpus.spec.T < transform::kCorruptionFrames) throw ConfigError("denoise needs sequences of at least 10 frames");
  const auto dir = prepare_out(f);

  model::NoiseSource noise(f.seed_given ? static_cast<uint64_t>(f.seed) : 0);
  std::vector<eval::MetricRow> rows;
  const auto n = std::min<int64_t>(f.n_sequences, static_cast<int64_t>(corpus.sequences.size()));
  for (int64_t i = 0; i < n; ++i) {
    const auto& s = corpus.sequences[static_cast<size_t>(i)];
    const auto clean = image_stack(s.x_v.narrow(0, 0, transform::kCorruptionFrames));
    const auto spectra = s.x_a.narrow(0, 0, transform::kCorruptionFrames);
    const auto baseline = transform::denoise(clean, spectra, model, vq.audio, vq.visual);
    for (const auto& region : regions) {
      rows.push_back({s.id, f.label + "/" + region.name + "/clean", "psnr",
                      eval::visual_metrics(clean, baseline, region).psnr});
      for (const auto var : variances) {
        const auto corrupted = transform::corrupt(clean, region, var, noise);
        const auto restored = transform::denoise(corrupted, spectra, model, vq.audio, vq.visual);
        const auto central = [&](const torch::Tensor& x) {
          return x.narrow(0, transform::kFirstCorrupted, transform::kLastCorrupted - transform::kFirstCorrupted + 1);
        };
        const auto m = eval::visual_metrics(central(clean), central(restored), region);
        const auto cond = f.label + "/" + region.name + "/" + std::to_string(var);
        rows.push_back({s.id, cond, "mse", m.mse});
        rows.push_back({s.id, cond, "psnr", m.psnr});
        rows.push_back({s.id, cond, "scc", m.scc});
        rows.push_back({s.id, cond, "ssim", m.ssim});
        rows.push_back({s.id, cond, "psnr_input", eval::visual_metrics(central(clean), central(corrupted), region).psnr});
      }
    }
  }
  eval::write_metrics_csv(dir / "metrics.csv", rows);
  write_summary(dir / "summary.json", rows);

  std::ostringstream curve;
  curve << "label,region,variance,psnr_mean,psnr_std\n";
  for (const auto& region : regions) {
    for (const auto var : variances) {
      std::vector<double> v;
      const auto cond = f.label + "/" + region.name + "/" + std::to_string(var);
      for (const auto& r : rows) {
        if (r.condition == cond && r.metric == "psnr") v.push_back(r.value);
      }
      const auto s = eval::summarize(v);
      curve << f.label << ',' << region.name << ',' << var << ',' << s.mean << ',' << s.std << '\n';
      out << region.name << " variance " << var << ": region PSNR " << s.mean << " dB\n";
    }
  }
  write_text(dir / "denoise_curve.csv", curve.str());
  return kExitOk;
}

int cmd_probe(const Flags& f, std::ostream& out) {
  const auto corpus = features::load_corpus(require_path(f.data, "--data"));
  auto model = train::mdvae_from_checkpoint(train::load_checkpoint(checkpoint_dir(require_path(f.model, "--model"))));
  std::optional<StageOne> vq;
  if (is_raw(corpus)) vq = load_vq(require_path(f.vq, "--vq"));
  const auto kind = eval::probe_kind_from_string(f.kind);
  const auto split = eval::split_kind_from_string(f.split);
  const auto dir = prepare_out(f);
  const auto seqs = model_space(corpus, vq ? &*vq : nullptr);
  std::vector<int64_t> labels, groups;
  for (const auto& s : seqs) {
    if (!s.factors) throw ConfigError("probe needs ground-truth labels; sequence " + s.id + " has none");
    labels.push_back(s.factors->s_cls);
    groups.push_back(s.factors->s_id);
  }
  const auto data = train::stack_sequences(seqs);
  const auto bundle = transform::analyze(model, data.x_a, data.x_v);
  eval::ProbeOptions opts;
  opts.kind = kind;
  opts.seed = f.seed_given ? static_cast<uint64_t>(f.seed) : 0;
  const auto report = eval::train_probe(bundle.w, torch::tensor(labels, torch::kInt64), torch::tensor(groups, torch::kInt64),
                                        corpus.spec.n_classes, split, opts, f.adapt);
  write_text(dir / "probe.json", eval::to_json(report).dump(2) + "\n");

  const auto pca = eval::pca_project(bundle.w, 2);
  std::ostringstream csv;
  csv << "sequence_id,pc1,pc2,s_cls,s_id\n";
  for (size_t i = 0; i < seqs.size(); ++i) {
    const auto row = static_cast<int64_t>(i);
    csv << seqs[i].id << ',' << pca.projection[row][0].item<double>() << ',' << pca.projection[row][1].item<double>()
        << ',' << labels[i] << ',' << groups[i] << '\n';
  }
  write_text(dir / "w_pca.csv", csv.str());
  out << eval::to_string(kind) << " " << eval::to_string(split) << ": accuracy " << report.accuracy << ", macro-F1 "
      << report.f1_macro << "\n";
  return kExitOk;
}

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path.string());
  std::vector<std::vector<std::string>> rows;
  std::string line;
  while (std::getline(in, line)) {
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    rows.push_back(std::move(cells));
  }
  return rows;
}

int cmd_plot(const Flags& f, std::ostream& out) {
  const fs::path in(require_path(f.input, "--input"));
  if (!fs::is_directory(in)) throw ConfigError("plot input " + in.string() + " is not a directory");
  const auto dir = prepare_out(f);
  int written = 0;

  for (const auto* name : {"loss.csv", "loss_audio.csv", "loss_visual.csv"}) {
    if (!fs::exists(in / name)) continue;
    const auto rows = read_csv(in / name);
    Series s;
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 2) continue;
      s.x.push_back(std::stod(rows[i][0]));
      s.y.push_back(std::stod(rows[i][1]));
    }
    const auto png = dir / (fs::path(name).stem().string() + ".png");
    write_line_plot(png, {s});
    fs::copy_file(in / name, dir / name, fs::copy_options::overwrite_existing);
    out << "wrote " << png.string() << "\n";
    ++written;
  }

  if (fs::exists(in / "denoise_curve.csv")) {
    const auto rows = read_csv(in / "denoise_curve.csv");
    std::map<std::string, Series> by_curve;
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4) continue;
      auto& s = by_curve[rows[i][0] + "/" + rows[i][1]];
      s.x.push_back(std::stod(rows[i][2]));
      s.y.push_back(std::stod(rows[i][3]));
    }
    std::vector<Series> series;
    int color = 0;
    std::ostringstream legend;
    legend << "color,curve\n";
    for (auto& [key, s] : by_curve) {
      legend << color << ',' << key << '\n';
      s.color = color++;
      series.push_back(s);
    }
    write_line_plot(dir / "psnr_vs_variance.png", series);
    write_text(dir / "psnr_vs_variance_legend.csv", legend.str());
    fs::copy_file(in / "denoise_curve.csv", dir / "denoise_curve.csv", fs::copy_options::overwrite_existing);
    out << "wrote " << (dir / "psnr_vs_variance.png").string() << "\n";
    ++written;
  }

  if (fs::exists(in / "w_pca.csv")) {
    const auto rows = read_csv(in / "w_pca.csv");
    std::vector<double> x, y;
    std::vector<int> labels;
    for (size_t i = 1; i < rows.size(); ++i) {
      if (rows[i].size() < 4) continue;
      x.push_back(std::stod(rows[i][1]));
      y.push_back(std::stod(rows[i][2]));
      labels.push_back(std::stoi(rows[i][3]));
    }
    write_scatter_plot(dir / "w_pca.png", x, y, labels);
    fs::copy_file(in / "w_pca.csv", dir / "w_pca.csv", fs::copy_options::overwrite_existing);
    out << "wrote " << (dir / "w_pca.png").string() << "\n";
    ++written;
  }

  if (written == 0) throw ConfigError("nothing to plot in " + in.string());
  return kExitOk;
}

void add_common(CLI::App* sub, Flags& f) {
  sub->add_option("--config", f.config, "JSON config file (sections corpus, train, model, vq_audio, vq_visual)");
  sub->add_option("--out", f.out, "Output directory")->required();
  sub->add_option("--seed", f.seed, "Seed for corpus and training (overrides MDVAE_SEED)")
      ->each([&f](const std::string&) { f.seed_given = true; });
  sub->add_option("--override", f.overrides, "section.key=value (repeatable)")->take_all();
  sub->add_flag("--overwrite", f.overwrite, "Replace an existing, non-empty output directory");
  sub->add_flag("--deterministic", f.deterministic, "Single-threaded, deterministic kernels");
}

}  // namespace

const std::vector<std::string>& commands() {
  static const std::vector<std::string> names{"gen-data", "train-vq", "train-mdvae", "resynth",
                                              "swap",     "denoise",  "probe",       "plot"};
  return names;
}

std::string suggest_command(const std::string& unknown) {
  std::string best;
  size_t best_d = std::string::npos;
  for (const auto& c : commands()) {
    const auto d = edit_distance(unknown, c);
    if (d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return best_d <= std::max<size_t>(2, unknown.size() / 3) ? best : "";
}

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Two-stage multimodal dynamical VAE toolkit", "vqmd"};
  app.require_subcommand(1);
  Flags f;

  auto* gen = app.add_subcommand("gen-data", "Generate a synthetic ground-truth-factor corpus");
  add_common(gen, f);

  auto* tvq = app.add_subcommand("train-vq", "Stage 1: train the audio and visual VQ-VAEs on a raw-like corpus");
  add_common(tvq, f);
  tvq->add_option("--data", f.data, "Corpus directory")->required();

  auto* tmd = app.add_subcommand("train-mdvae", "Stage 2: train the MDVAE");
  add_common(tmd, f);
  tmd->add_option("--data", f.data, "Corpus directory")->required();
  tmd->add_option("--vq", f.vq, "Stage-1 output directory (raw-like corpora)");

  auto* rs = app.add_subcommand("resynth", "Analysis-resynthesis of every corpus sequence");
  add_common(rs, f);
  rs->add_option("--data", f.data, "Corpus directory")->required();
  rs->add_option("--model", f.model, "MDVAE checkpoint or train-mdvae output directory")->required();
  rs->add_option("--vq", f.vq, "Stage-1 output directory (raw-like corpora)");

  auto* sw = app.add_subcommand("swap", "Latent-swap attribute protocol (PCC / MAE)");
  add_common(sw, f);
  sw->add_option("--data", f.data, "Corpus directory")->required();
  sw->add_option("--model", f.model, "MDVAE checkpoint")->required();
  sw->add_option("--vq", f.vq, "Stage-1 output directory (raw-like corpora)");
  sw->add_option("--variable", f.variable, "w | zav | za | zv");
  sw->add_option("--repeats", f.repeats, "Number of source sequences A");
  sw->add_option("--recipients", f.recipients, "Sequences B per repeat");

  auto* dn = app.add_subcommand("denoise", "Corrupt central frames in a face region and reconstruct them");
  add_common(dn, f);
  dn->add_option("--data", f.data, "Raw-like corpus directory")->required();
  dn->add_option("--model", f.model, "MDVAE checkpoint")->required();
  dn->add_option("--vq", f.vq, "Stage-1 output directory")->required();
  dn->add_option("--region", f.region, "mouth | eyes | both");
  dn->add_option("--variances", f.variances, "Comma-separated noise variances");
  dn->add_option("--sequences", f.n_sequences, "Number of sequences");
  dn->add_option("--label", f.label, "Condition prefix in the outputs");

  auto* pr = app.add_subcommand("probe", "Static-class probe on w");
  add_common(pr, f);
  pr->add_option("--data", f.data, "Corpus directory")->required();
  pr->add_option("--model", f.model, "MDVAE checkpoint")->required();
  pr->add_option("--vq", f.vq, "Stage-1 output directory (raw-like corpora)");
  pr->add_option("--kind", f.kind, "mlr | mlp");
  pr->add_option("--split", f.split, "person-dependent | person-independent");
  pr->add_flag("--adapt", f.adapt, "Map held-out w onto the training w by optimal transport");

  auto* pl = app.add_subcommand("plot", "PNG plots from a results directory");
  add_common(pl, f);
  pl->add_option("--input", f.input, "Directory written by another command")->required();

  if (args.empty()) {
    err << app.help();
    return kExitUsage;
  }
  if (!args.front().empty() && args.front()[0] != '-') {
    const auto& cmd = args.front();
    if (std::find(commands().begin(), commands().end(), cmd) == commands().end()) {
      err << "vqmd: unknown command '" << cmd << "'";
      const auto hint = suggest_command(cmd);
      if (!hint.empty()) err << "; did you mean '" << hint << "'?";
      err << "\n";
      return kExitUsage;
    }
  }

  std::vector<std::string> argv_storage{"vqmd"};
  argv_storage.insert(argv_storage.end(), args.begin(), args.end());
  std::vector<char*> argv;
  for (auto& s : argv_storage) argv.push_back(s.data());

  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "vqmd: " << e.what() << "\n" << "run 'vqmd --help' for usage\n";
    return kExitUsage;
  }

  const std::map<std::string, int (*)(const Flags&, std::ostream&)> handlers{
      {"gen-data", cmd_gen_data}, {"train-vq", cmd_train_vq}, {"train-mdvae", cmd_train_mdvae},
      {"resynth", cmd_resynth},   {"swap", cmd_swap},         {"denoise", cmd_denoise},
      {"probe", cmd_probe},       {"plot", cmd_plot}};
  const auto* sub = app.get_subcommands().front();
  try {
    return handlers.at(sub->get_name())(f, out);
  } catch (const UsageError& e) {
    err << "vqmd " << sub->get_name() << ": " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "vqmd " << sub->get_name() << ": " << e.what() << "\n";
    return kExitRuntime;
  }
}

}  // namespace vqmd::cli
