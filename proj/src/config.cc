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

#include "psel/config.h"

#include <algorithm>
#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <charconv>
#include <fstream>
#include <functional>
#include <regex>
#include <sstream>
#include <vector>

#include "psel/error.h"

namespace psel {

namespace {

template <class T>
T parse_number(const std::string& key, const std::string& text) {
  T v{};
  const char* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, v);
  PSEL_ENFORCE(ec == std::errc() && ptr == end, kConfig, key << ": cannot parse '" << text << "'");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

bool parse_bool(const std::string& key, const std::string& text) {
  if (text == "true") return true;
  if (text == "false") return false;
  throw_error(ErrorCategory::kConfig, key + ": expected true or false, got '" + text + "'");
}

struct Key {
  const char* section;
  const char* name;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string& key, const std::string&)> set;
};

#define PSEL_INT_KEY(section, name, expr)                                                          \
  Key {                                                                                            \
    section, name, [](const ExperimentConfig& c) { return std::to_string(c.expr); },              \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
          c.expr = parse_number<std::remove_cvref_t<decltype(c.expr)>>(k, v);                     \
        }                                                                                          \
  }
#define PSEL_DOUBLE_KEY(section, name, expr)                                                       \
  Key {                                                                                            \
    section, name, [](const ExperimentConfig& c) { return format_double(c.expr); },               \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {                     \
          c.expr = parse_number<double>(k, v);                                                     \
        }                                                                                          \
  }
#define PSEL_STRING_KEY(section, name, expr)                                                    \
  Key {                                                                                         \
    section, name, [](const ExperimentConfig& c) { return c.expr; },                            \
        [](ExperimentConfig& c, const std::string&, const std::string& v) { c.expr = v; }      \
  }

const std::vector<Key>& keys() {
  static const std::vector<Key> table = {
      PSEL_INT_KEY("session", "ring_bits", session.ring_bits),
      PSEL_INT_KEY("session", "frac_bits", session.frac_bits),
      PSEL_INT_KEY("session", "seed", session.seed),
      Key{"session", "product_budget",
          [](const ExperimentConfig& c) {
            return c.session.product_budget ? std::to_string(*c.session.product_budget) : std::string("none");
          },
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            if (v == "none") {
              c.session.product_budget.reset();
            } else {
              c.session.product_budget = parse_number<std::uint64_t>(k, v);
            }
          }},
      Key{"session", "transport", [](const ExperimentConfig& c) { return std::string(transport_name(c.transport)); },
          [](ExperimentConfig& c, const std::string&, const std::string& v) { c.transport = parse_transport(v); }},
      PSEL_DOUBLE_KEY("network", "bandwidth", session.network.bandwidth),
      PSEL_DOUBLE_KEY("network", "latency", session.network.latency),
      Key{"comparison", "use_model",
          [](const ExperimentConfig& c) { return std::string(c.session.comparison.use_model ? "true" : "false"); },
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            c.session.comparison.use_model = parse_bool(k, v);
          }},
      PSEL_INT_KEY("comparison", "rounds", session.comparison.rounds),
      PSEL_INT_KEY("comparison", "bytes", session.comparison.bytes),
      PSEL_INT_KEY("kernels", "exp_iters", session.kernels.exp_iters),
      PSEL_INT_KEY("kernels", "reciprocal_iters", session.kernels.reciprocal_iters),
      PSEL_INT_KEY("kernels", "rsqrt_iters", session.kernels.rsqrt_iters),
      PSEL_INT_KEY("kernels", "log_iters", session.kernels.log_iters),
      Key{"kernels", "domain",
          [](const ExperimentConfig& c) {
            return std::string(c.session.kernels.domain == DomainMode::kStrict ? "strict" : "permissive");
          },
          [](ExperimentConfig& c, const std::string& k, const std::string& v) {
            PSEL_ENFORCE(v == "strict" || v == "permissive", kConfig, k << ": expected strict or permissive");
            c.session.kernels.domain = v == "strict" ? DomainMode::kStrict : DomainMode::kPermissive;
          }},
      PSEL_INT_KEY("model", "layers", model.layers),
      PSEL_INT_KEY("model", "heads", model.heads),
      PSEL_INT_KEY("model", "dim", model.dim),
      PSEL_INT_KEY("model", "head_dim", model.head_dim),
      PSEL_INT_KEY("model", "seq_len", model.seq_len),
      PSEL_INT_KEY("model", "classes", model.classes),
      PSEL_DOUBLE_KEY("model", "mask_value", model.mask_value),
      PSEL_INT_KEY("model", "ffn_dim", model.ffn_dim),
      PSEL_INT_KEY("model", "vocab", model.vocab),
      PSEL_DOUBLE_KEY("model", "ln_eps", model.ln_eps),
      PSEL_INT_KEY("data", "count", data_count),
      Key{"plan", "phases", [](const ExperimentConfig& c) { return format_phases(c.plan.phases); },
          [](ExperimentConfig& c, const std::string&, const std::string& v) { c.plan.phases = parse_phases(v); }},
      PSEL_INT_KEY("plan", "budget", plan.budget),
      PSEL_DOUBLE_KEY("plan", "bootstrap_fraction", plan.bootstrap_fraction),
      PSEL_INT_KEY("plan", "batch_size", batch_size),
      Key{"plan", "variant", [](const ExperimentConfig& c) { return std::string(pipeline_variant_name(c.variant)); },
          [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.variant = parse_pipeline_variant(v);
          }},
      PSEL_INT_KEY("train", "samples", train.samples),
      PSEL_DOUBLE_KEY("train", "learning_rate", train.learning_rate),
      PSEL_INT_KEY("train", "epochs", train.epochs),
      PSEL_INT_KEY("train", "batch_size", train.batch_size),
      PSEL_DOUBLE_KEY("train", "momentum", train.momentum),
      PSEL_DOUBLE_KEY("train", "heldout_fraction", train.heldout_fraction),
      Key{"appraisal", "mode", [](const ExperimentConfig& c) { return std::string(appraisal_name(c.appraisal.mode)); },
          [](ExperimentConfig& c, const std::string&, const std::string& v) {
            c.appraisal.mode = parse_appraisal(v);
          }},
      PSEL_DOUBLE_KEY("appraisal", "threshold", appraisal.threshold),
      PSEL_INT_KEY("scheduler", "latency_threshold", scheduler.latency_threshold),
      PSEL_INT_KEY("scheduler", "window", coalesce_window),
      PSEL_DOUBLE_KEY("scheduler", "flops_per_second", compute.flops_per_second),
      PSEL_INT_KEY("scheduler", "memory_cap", memory_cap),
      PSEL_STRING_KEY("paths", "model", paths.model),
      PSEL_STRING_KEY("paths", "dataset", paths.dataset),
      PSEL_STRING_KEY("paths", "out", paths.out),
  };
  return table;
}

#undef PSEL_INT_KEY
#undef PSEL_DOUBLE_KEY
#undef PSEL_STRING_KEY

}  // namespace

std::string format_phases(const std::vector<Phase>& phases) {
  std::string out;
  for (const Phase& ph : phases) {
    if (!out.empty()) out += ' ';
    out += '<' + std::to_string(ph.spec.layers) + ',' + std::to_string(ph.spec.heads) + ',' +
           std::to_string(ph.spec.hidden) + ">:" + format_double(ph.selectivity);
  }
  return out;
}

std::vector<Phase> parse_phases(std::string_view text) {
  static const std::regex entry(R"(<\s*(\d+)\s*,\s*(\d+)\s*,\s*(\d+)\s*>\s*:\s*([0-9.eE+-]+))");
  std::vector<Phase> out;
  const std::string s(text);
  auto it = std::sregex_iterator(s.begin(), s.end(), entry);
  std::size_t consumed = 0;
  for (; it != std::sregex_iterator(); ++it) {
    const std::smatch& m = *it;
    const std::string gap = s.substr(consumed, static_cast<std::size_t>(m.position()) - consumed);
    PSEL_ENFORCE(gap.find_first_not_of(" \t") == std::string::npos, kConfig,
                 "plan.phases: unexpected '" << gap << "'");
    Phase ph;
    ph.spec.layers = parse_number<int>("plan.phases", m[1]);
    ph.spec.heads = parse_number<int>("plan.phases", m[2]);
    ph.spec.hidden = parse_number<int>("plan.phases", m[3]);
    ph.selectivity = parse_number<double>("plan.phases", m[4]);
    out.push_back(ph);
    consumed = static_cast<std::size_t>(m.position() + m.length());
  }
  PSEL_ENFORCE(s.substr(consumed).find_first_not_of(" \t") == std::string::npos, kConfig,
               "plan.phases: unexpected '" << s.substr(consumed) << "'");
  PSEL_ENFORCE(!out.empty(), kConfig, "plan.phases: expected entries like <1,1,2>:0.5");
  return out;
}

ExperimentConfig default_config() {
  ExperimentConfig c;
  c.model.layers = 2;
  c.model.heads = 4;
  c.model.dim = 64;
  c.model.seq_len = 128;
  c.model.classes = 2;
  c.data_count = 256;
  c.plan.phases = {Phase{{1, 1, 2}, 0.5}, Phase{{2, 2, 16}, 0.3}};
  c.plan.budget = 40;
  c.plan.bootstrap_fraction = 0.05;
  return c;
}

void ExperimentConfig::validate() const {
  session.validate();
  model.validate();
  PSEL_ENFORCE(data_count >= 2, kConfig, "data.count must be at least 2");
  plan.validate(model, data_count);
  PSEL_ENFORCE(batch_size >= 1, kConfig, "plan.batch_size must be at least 1");
  train.validate();
  PSEL_ENFORCE(coalesce_window >= 1, kConfig, "scheduler.window must be at least 1");
  compute.validate();
  PSEL_ENFORCE(!paths.out.empty(), kConfig, "paths.out is empty");
}

PipelineConfig ExperimentConfig::pipeline() const {
  PipelineConfig p;
  p.session = session;
  p.plan = plan;
  p.variant = variant;
  p.batch_size = batch_size;
  p.train = train;
  p.appraisal = appraisal;
  p.transport = transport;
  return p;
}

ExperimentConfig parse_config(std::string_view text, std::string_view source) {
  namespace pt = boost::property_tree;
  pt::ptree tree;
  std::istringstream in{std::string(text)};
  try {
    pt::ini_parser::read_ini(in, tree);
  } catch (const pt::ini_parser_error& e) {
    throw_error(ErrorCategory::kConfig, std::string(source) + ": line " + std::to_string(e.line()) + ": " +
                                            e.message());
  }
  ExperimentConfig cfg = default_config();
  for (const auto& [section, body] : tree) {
    PSEL_ENFORCE(!(body.empty() && !body.data().empty()), kConfig,
                 source << ": key '" << section << "' outside any section");
    for (const auto& [name, value] : body) {
      const std::string full = section + "." + name;
      const auto& table = keys();
      const auto it = std::find_if(table.begin(), table.end(),
                                   [&](const Key& k) { return section == k.section && name == k.name; });
      PSEL_ENFORCE(it != table.end(), kConfig, source << ": unknown key '" << full << "'");
      it->set(cfg, full, value.data());
    }
  }
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  PSEL_ENFORCE(in.good(), kIo, "cannot open config '" << path << "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), path);
}

std::string emit_config(const ExperimentConfig& cfg) {
  std::ostringstream os;
  std::string section;
  for (const Key& k : keys()) {
    if (section != k.section) {
      if (!section.empty()) os << '\n';
      section = k.section;
      os << '[' << section << "]\n";
    }
    os << k.name << " = " << k.get(cfg) << '\n';
  }
  return os.str();
}

}  // namespace psel
