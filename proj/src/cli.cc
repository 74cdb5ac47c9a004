// Copyright 2026 The psel Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "psel/cli.h"

#include <CLI11.hpp>
#include <filesystem>
#include <iomanip>
#include <json.hpp>
#include <optional>
#include <ostream>
#include <sstream>

#include "psel/error.h"
#include "psel/io.h"
#include "psel/prng.h"
#include "psel/scheduler.h"
#include "psel/selection.h"

namespace psel {

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;

namespace {

std::string under_out(const ExperimentConfig& cfg, const std::string& p) {
  const fs::path path(p);
  return path.is_absolute() ? p : (fs::path(cfg.paths.out) / path).string();
}

std::string spec_text(const ProxySpec& s) {
  return "<" + std::to_string(s.layers) + "," + std::to_string(s.heads) + "," + std::to_string(s.hidden) + ">";
}

std::string mlp_file(const ExperimentConfig& cfg, const ProxySpec& spec, SiteKind site, int layer) {
  const std::string name =
      site == SiteKind::kSoftmaxEntropy ? "entropy.sfmt" : std::string(site_name(site)) + "_l" + std::to_string(layer) + ".sfmt";
  return (fs::path(mlp_dir(cfg, spec)) / name).string();
}

std::string dump(const Json& j) { return j.dump(2) + "\n"; }

Json mlp_json(const MlpApprox& m) {
  return {{"site", site_name(m.site)},
          {"layer", m.layer},
          {"in", m.in()},
          {"hidden", m.hidden()},
          {"out", m.out()},
          {"train_mse", m.train_mse},
          {"heldout_mse", m.heldout_mse}};
}

std::vector<const MlpApprox*> proxy_mlps(const ProxyModel& p) {
  std::vector<const MlpApprox*> out;
  for (std::size_t l = 0; l < p.softmax_mlps.size(); ++l) {
    out.push_back(&p.softmax_mlps[l]);
    out.push_back(&p.ln_mlps[l]);
  }
  out.push_back(&p.entropy_mlp);
  return out;
}

// Zero-valued MLPs of the right shapes. Ledger costs depend only on shapes.
ProxyModel shape_only_proxy(const TransformerWeights& target, const ProxySpec& spec) {
  ProxyModel p;
  p.spec = spec;
  p.weights = proxy_base(target, spec);
  const TransformerConfig& c = p.weights.config;
  auto blank = [&](SiteKind site, int layer, int in, int out) {
    MlpApprox m;
    m.site = site;
    m.layer = layer;
    m.w1 = Matrix::Zero(in, spec.hidden);
    m.b1 = Vector::Zero(spec.hidden);
    m.w2 = Matrix::Zero(spec.hidden, out);
    m.b2 = Vector::Zero(out);
    return m;
  };
  for (int l = 0; l < spec.layers; ++l) {
    p.softmax_mlps.push_back(blank(SiteKind::kAttnSoftmax, l, c.seq_len, c.seq_len));
    p.ln_mlps.push_back(blank(SiteKind::kLnRecip, l, 1, 1));
  }
  p.entropy_mlp = blank(SiteKind::kSoftmaxEntropy, -1, c.classes, 1);
  p.validate();
  return p;
}

struct ScheduleSummary {
  double sequential = 0.0;
  double overlapped = 0.0;
  std::uint64_t bytes_before = 0;
  std::uint64_t bytes_after = 0;
  Timeline timeline;
};

ScheduleSummary schedule(const ExperimentConfig& cfg, const CostLedger& ledger) {
  const Dag dag = build_dag(ledger.trace(), cfg.scheduler);
  const Dag merged = coalesce(dag, cfg.coalesce_window);
  ScheduleSummary s;
  s.sequential = sequential_baseline(dag, cfg.session.network, cfg.compute).makespan;
  s.timeline = simulate(merged, cfg.session.network, cfg.compute, cfg.effective_memory_cap());
  s.overlapped = s.timeline.makespan;
  s.bytes_before = dag.total_bytes();
  s.bytes_after = merged.total_bytes();
  return s;
}

std::string ledger_text(const CostLedger& ledger) {
  std::ostringstream os;
  os << format_cost_table(cost_rows(ledger));
  if (!ledger.analytic().empty()) {
    os << "\nanalytic cost of model-charged protocols\n";
    for (const auto& [tag, c] : ledger.analytic()) {
      os << std::left << std::setw(20) << tag << std::right << std::setw(10) << c.rounds << std::setw(16) << c.bytes
         << "\n";
    }
  }
  return os.str();
}

Json reveal_json(const RevealLog& log) {
  Json j;
  Json kinds = Json::object();
  for (const RevealEntry& e : log.entries()) {
    const std::string k(reveal_kind_name(e.kind));
    kinds[k] = kinds.value(k, 0) + 1;
  }
  j["entries"] = log.entries().size();
  j["kinds"] = kinds;
  j["digest"] = log.digest();
  j["audit"] = "pass";
  return j;
}

struct Inputs {
  TransformerWeights target;
  Dataset data;
};

Inputs load_inputs(const ExperimentConfig& cfg) {
  Inputs in{load_model(model_path(cfg)), load_dataset(dataset_path(cfg))};
  PSEL_ENFORCE(in.target.config == cfg.model, kConfig,
               "model file '" << model_path(cfg) << "' was generated for a different [model] section");
  PSEL_ENFORCE(in.data.size() == cfg.data_count, kConfig,
               "dataset holds " << in.data.size() << " examples, config says " << cfg.data_count);
  return in;
}

PipelineResult checked_pipeline(const ExperimentConfig& cfg, PipelineVariant variant, const Inputs& in,
                                std::span<const ProxyModel> prebuilt) {
  PipelineConfig pc = cfg.pipeline();
  pc.variant = variant;
  PipelineResult r = run_pipeline(pc, in.target, in.data, prebuilt);
  std::string why;
  PSEL_ENFORCE(r.reveals.audit(&why), kAudit, "reveal log failed the privacy audit: " << why);
  return r;
}

}  // namespace

std::string model_path(const ExperimentConfig& cfg) { return under_out(cfg, cfg.paths.model); }
std::string dataset_path(const ExperimentConfig& cfg) { return under_out(cfg, cfg.paths.dataset); }

std::string mlp_dir(const ExperimentConfig& cfg, const ProxySpec& spec) {
  return (fs::path(cfg.paths.out) / "mlp" /
          (std::to_string(spec.layers) + "-" + std::to_string(spec.heads) + "-" + std::to_string(spec.hidden)))
      .string();
}

std::vector<ProxySpec> plan_specs(const PhasePlan& plan) {
  std::vector<ProxySpec> out;
  for (const Phase& ph : plan.phases) {
    if (std::find(out.begin(), out.end(), ph.spec) == out.end()) out.push_back(ph.spec);
  }
  return out;
}

void cmd_gen(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::uint64_t seed = cfg.session.seed;
  const TransformerWeights w = random_weights(cfg.model, derive_seed(seed, "weights"));
  const Dataset d = random_dataset(cfg.model, cfg.data_count, derive_seed(seed, "data"));
  save_model(model_path(cfg), w);
  save_dataset(dataset_path(cfg), d);
  write_text((fs::path(cfg.paths.out) / "config.ini").string(), emit_config(cfg));
  log << "wrote " << model_path(cfg) << " and " << dataset_path(cfg) << " (" << d.size() << " examples)\n";
}

void cmd_train_approx(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const Inputs in = load_inputs(cfg);
  const PipelineConfig pc = cfg.pipeline();
  const std::vector<std::size_t> boot = pipeline_bootstrap(cfg.plan, in.data.size(), cfg.session.seed);
  const Dataset boot_data = in.data.subset(boot);
  const TrainConfig train = pipeline_train(pc);

  Json report;
  report["bootstrap"] = boot.size();
  report["samples"] = train.samples;
  auto& proxies = report["proxies"] = Json::array();
  std::size_t files = 0;
  for (const ProxySpec& spec : plan_specs(cfg.plan)) {
    const ProxyModel p = build_proxy(in.target, spec, boot_data, train);
    Json entry;
    entry["spec"] = spec_text(spec);
    auto& sites = entry["mlps"] = Json::array();
    for (const MlpApprox* m : proxy_mlps(p)) {
      save_mlp(mlp_file(cfg, spec, m->site, m->layer), *m);
      sites.push_back(mlp_json(*m));
      ++files;
    }
    proxies.push_back(entry);
    log << "proxy " << spec_text(spec) << ": " << p.mlp_count() << " MLPs\n";
  }
  report["files"] = files;
  write_text((fs::path(cfg.paths.out) / "train_report.json").string(), dump(report));
  log << "wrote " << files << " MLP files under " << (fs::path(cfg.paths.out) / "mlp").string() << "\n";
}

std::vector<ProxyModel> load_proxies(const ExperimentConfig& cfg, const TransformerWeights& target) {
  std::vector<ProxyModel> out;
  for (const ProxySpec& spec : plan_specs(cfg.plan)) {
    ProxyModel p;
    p.spec = spec;
    p.weights = proxy_base(target, spec);
    auto get = [&](SiteKind site, int layer) -> std::optional<MlpApprox> {
      const std::string f = mlp_file(cfg, spec, site, layer);
      if (!fs::exists(f)) return std::nullopt;
      return load_mlp(f);
    };
    for (int l = 0; l < spec.layers; ++l) {
      auto s = get(SiteKind::kAttnSoftmax, l);
      auto n = get(SiteKind::kLnRecip, l);
      if (!s || !n) return {};
      p.softmax_mlps.push_back(std::move(*s));
      p.ln_mlps.push_back(std::move(*n));
    }
    auto e = get(SiteKind::kSoftmaxEntropy, -1);
    if (!e) return {};
    p.entropy_mlp = std::move(*e);
    p.validate();
    out.push_back(std::move(p));
  }
  return out;
}

void cmd_select(const ExperimentConfig& cfg, bool compare, std::ostream& log) {
  cfg.validate();
  const Inputs in = load_inputs(cfg);
  const std::vector<ProxyModel> prebuilt =
      cfg.variant == PipelineVariant::kP ? std::vector<ProxyModel>{} : load_proxies(cfg, in.target);
  log << (prebuilt.empty() ? "training proxy MLPs" : "using MLPs from train-approx") << "\n";

  const PipelineResult r = checked_pipeline(cfg, cfg.variant, in, prebuilt);
  const SelectionOutcome& o = r.outcome;

  Json report;
  report["variant"] = pipeline_variant_name(cfg.variant);
  report["seed"] = cfg.session.seed;
  report["dataset_size"] = in.data.size();
  report["budget"] = cfg.plan.budget;
  report["bootstrap"] = o.bootstrap;
  auto& phases = report["phases"] = Json::array();
  const bool multiphase = cfg.variant == PipelineVariant::kPMT || cfg.variant == PipelineVariant::kFull;
  const PhasePlan plan = multiphase ? cfg.plan : cfg.plan.collapsed(o.survivors.front().size());
  for (std::size_t i = 0; i < o.phases.size(); ++i) {
    phases.push_back({{"spec", spec_text(plan.phases[i].spec)},
                      {"selectivity", plan.phases[i].selectivity},
                      {"input", o.phases[i].input_size},
                      {"kept", o.phases[i].kept},
                      {"comparisons", o.phases[i].quickselect.comparisons},
                      {"passes", o.phases[i].quickselect.passes}});
  }
  report["selected"] = o.selected();
  report["purchase"] = o.purchase;
  if (o.appraisal) {
    Json a{{"mode", appraisal_name(o.appraisal->mode)}};
    if (o.appraisal->mode == AppraisalMode::kOpen) a["mean"] = o.appraisal->mean;
    if (o.appraisal->mode == AppraisalMode::kThreshold) {
      a["threshold"] = cfg.appraisal.threshold;
      a["above"] = o.appraisal->above;
    }
    report["appraisal"] = a;
  }
  report["reveals"] = reveal_json(r.reveals);
  report["cost"] = cost_json(r.ledger);

  const std::string out = cfg.paths.out;
  if (cfg.variant == PipelineVariant::kFull) {
    const ScheduleSummary s = schedule(cfg, r.ledger);
    report["schedule"] = {{"window", cfg.coalesce_window},
                          {"flops_per_second", cfg.compute.flops_per_second},
                          {"sequential_seconds", s.sequential},
                          {"overlapped_seconds", s.overlapped},
                          {"speedup", s.sequential / s.overlapped},
                          {"bytes_before", s.bytes_before},
                          {"bytes_after", s.bytes_after},
                          {"peak_memory", s.timeline.peak_memory}};
    write_text((fs::path(out) / "timeline.txt").string(), s.timeline.trace_text());
  }

  if (compare) {
    auto& cmp = report["comparison"] = Json::array();
    for (auto v : {PipelineVariant::kP, PipelineVariant::kPM, PipelineVariant::kPMT, PipelineVariant::kFull}) {
      const PipelineResult other = v == cfg.variant ? r : checked_pipeline(cfg, v, in, prebuilt);
      const TagCost t = other.ledger.total();
      double seconds = t.seconds;
      if (v == PipelineVariant::kFull) seconds = schedule(cfg, other.ledger).overlapped;
      cmp.push_back({{"variant", pipeline_variant_name(v)},
                     {"rounds", t.rounds},
                     {"bytes", t.bytes},
                     {"seconds", seconds},
                     {"selected", other.outcome.selected().size()}});
      log << "variant " << pipeline_variant_name(v) << ": " << t.bytes << " bytes, " << seconds << " s\n";
    }
  }

  write_text((fs::path(out) / "indices.txt").string(), format_indices(o.purchase));
  write_text((fs::path(out) / "report.json").string(), dump(report));
  write_text((fs::path(out) / "ledger.txt").string(), ledger_text(r.ledger));
  write_text((fs::path(out) / "config.ini").string(), emit_config(cfg));
  log << "selected " << o.selected().size() << " + bootstrap " << o.bootstrap.size() << " = " << o.purchase.size()
      << " examples; " << r.ledger.total().bytes << " bytes\n";
}

void cmd_bench(const ExperimentConfig& cfg, std::ostream& log) {
  cfg.validate();
  const std::uint64_t seed = cfg.session.seed;
  const TransformerWeights target = random_weights(cfg.model, derive_seed(seed, "weights"));
  const Dataset one = random_dataset(cfg.model, 1, derive_seed(seed, "data"));
  const ProxyVariant pv = cfg.variant == PipelineVariant::kP ? ProxyVariant::kBaseline : ProxyVariant::kMlp;

  std::ostringstream text;
  Json report = Json::array();
  for (const ProxySpec& spec : plan_specs(cfg.plan)) {
    const ProxyModel proxy = shape_only_proxy(target, spec);
    const ProxyArch arch = proxy_arch(proxy, pv);
    auto run = run_two_party(
        cfg.session,
        [&](Party& p) {
          const SharedProxy sp = share_proxy(p, 0, arch, p.id() == 0 ? &proxy : nullptr);
          const SharedBatch b = share_batch(p, 1, sp, p.id() == 1 ? &one : nullptr, 1);
          forward_entropy_mpc(p, sp, b);
          return 0;
        },
        cfg.transport);
    text << "proxy " << spec_text(spec) << " variant " << variant_name(pv) << ", one forward pass\n"
         << format_cost_table(cost_rows(run.ledgers[0])) << "\n";
    Json j = cost_json(run.ledgers[0]);
    j["spec"] = spec_text(spec);
    j["variant"] = variant_name(pv);
    report.push_back(j);
  }
  write_text((fs::path(cfg.paths.out) / "bench.txt").string(), text.str());
  write_text((fs::path(cfg.paths.out) / "bench.json").string(), dump(report));
  log << text.str();
}

void cmd_report(const ExperimentConfig& cfg, std::ostream& log) {
  const std::string path = (fs::path(cfg.paths.out) / "report.json").string();
  const Bytes raw = read_file(path);
  Json j;
  try {
    j = Json::parse(raw.begin(), raw.end());
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCategory::kIo, path + ": " + e.what());
  }
  try {
    log << "variant " << j.at("variant").get<std::string>() << ", seed " << j.at("seed").get<std::uint64_t>()
        << ", " << j.at("dataset_size").get<std::size_t>() << " examples\n";
    for (const auto& ph : j.at("phases")) {
      log << "  phase " << ph.at("spec").get<std::string>() << ": " << ph.at("input").get<std::size_t>() << " -> "
          << ph.at("kept").get<std::size_t>() << " (" << ph.at("comparisons").get<std::size_t>() << " comparisons)\n";
    }
    log << "  purchase " << j.at("purchase").size() << " examples\n";
    const auto& total = j.at("cost").at("total");
    log << "  cost " << total.at("rounds").get<std::uint64_t>() << " rounds, " << total.at("bytes").get<std::uint64_t>()
        << " bytes, " << total.at("seconds").get<double>() << " s\n";
    if (j.contains("schedule")) {
      log << "  scheduled " << j["schedule"].at("overlapped_seconds").get<double>() << " s (speedup "
          << j["schedule"].at("speedup").get<double>() << ")\n";
    }
    if (j.contains("comparison")) {
      for (const auto& c : j["comparison"]) {
        log << "  " << std::left << std::setw(5) << c.at("variant").get<std::string>() << std::right
            << std::setw(14) << c.at("bytes").get<std::uint64_t>() << " bytes " << std::setw(12)
            << c.at("seconds").get<double>() << " s\n";
      }
    }
    log << "  reveals " << j.at("reveals").at("entries").get<std::size_t>() << ", digest "
        << j.at("reveals").at("digest").get<std::string>() << "\n";
  } catch (const nlohmann::json::exception& e) {
    throw_error(ErrorCategory::kIo, path + ": malformed report: " + e.what());
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Private data selection with secret-shared proxy models"};
  app.require_subcommand(1);
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> transport, variant, out_dir;
  bool compare = false;
  app.add_option("--config", config_path, "INI configuration file");
  app.add_option("--seed", seed, "master seed (overrides [session] seed)");
  app.add_option("--transport", transport, "loopback or socket")->check(CLI::IsMember({"loopback", "socket"}));
  app.add_option("--variant", variant, "P, PM, PMT or full")->check(CLI::IsMember({"P", "PM", "PMT", "full"}));
  app.add_option("--out", out_dir, "output directory (overrides [paths] out)");
  app.add_subcommand("gen", "generate a seeded model and dataset");
  app.add_subcommand("train-approx", "train and save the proxy MLPs");
  auto* select = app.add_subcommand("select", "run private selection");
  select->add_flag("--compare", compare, "also run the other variants and compare costs");
  app.add_subcommand("bench", "cost table for one proxy forward pass");
  app.add_subcommand("report", "summarize a select run");
  app.fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : exit_code(ErrorCategory::kConfig);
  }

  try {
    ExperimentConfig cfg = config_path.empty() ? default_config() : load_config(config_path);
    if (seed) cfg.session.seed = *seed;
    if (transport) cfg.transport = parse_transport(*transport);
    if (variant) cfg.variant = parse_pipeline_variant(*variant);
    if (out_dir) cfg.paths.out = *out_dir;
    const std::string verb = app.get_subcommands().front()->get_name();
    if (verb == "gen") cmd_gen(cfg, out);
    if (verb == "train-approx") cmd_train_approx(cfg, out);
    if (verb == "select") cmd_select(cfg, compare, out);
    if (verb == "bench") cmd_bench(cfg, out);
    if (verb == "report") cmd_report(cfg, out);
  } catch (const Error& e) {
    err << "psel: " << e.what() << "\n";
    return exit_code(e.category());
  } catch (const std::filesystem::filesystem_error& e) {
    err << "psel: io: " << e.what() << "\n";
    return exit_code(ErrorCategory::kIo);
  }
  return 0;
}

}  // namespace psel
