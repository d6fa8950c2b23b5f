#include "adathresh/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "parallel.hpp"

#include "adathresh/rng.hpp"

namespace adathresh {

namespace {

using nlohmann::json;

template <typename T>
T parse_enum(const std::string& value,
             const std::vector<std::pair<std::string, T>>& table,
             const std::string& field) {
  for (const auto& [name, v] : table)
    if (name == value) return v;
  std::string options;
  for (const auto& [name, v] : table) options += " '" + name + "'";
  throw config_error("unknown " + field + " '" + value + "'; expected one of" +
                     options);
}

const std::vector<std::pair<std::string, GraphKind>> kGraphKinds{
    {"cycle", GraphKind::cycle},
    {"sbm", GraphKind::sbm},
    {"edge_list", GraphKind::edge_list}};
const std::vector<std::pair<std::string, UnitsRule>> kUnitsRules{
    {"all", UnitsRule::all},
    {"non_isolated", UnitsRule::non_isolated},
    {"first_non_isolated", UnitsRule::first_non_isolated}};
const std::vector<std::pair<std::string, DesignKind>> kDesignKinds{
    {"unit", DesignKind::unit_bernoulli},
    {"cluster", DesignKind::cluster_bernoulli}};
const std::vector<std::pair<std::string, ClusterSource>> kClusterSources{
    {"none", ClusterSource::none},
    {"contiguous", ClusterSource::contiguous},
    {"file", ClusterSource::file}};
const std::vector<std::pair<std::string, ExposureEffect>> kEffects{
    {"linear", ExposureEffect::linear},
    {"sigmoid", ExposureEffect::sigmoid},
    {"sine", ExposureEffect::sine}};
const std::vector<std::pair<std::string, MarginalsEngine>> kMarginals{
    {"exact", MarginalsEngine::exact},
    {"mc", MarginalsEngine::mc},
    {"enumeration", MarginalsEngine::enumeration}};
const std::vector<std::pair<std::string, JointsEngine>> kJoints{
    {"none", JointsEngine::none},
    {"mc", JointsEngine::mc},
    {"enumeration", JointsEngine::enumeration}};
const std::vector<std::pair<std::string, Family>> kFamilies{
    {"ht", Family::horvitz_thompson},
    {"dim", Family::difference_in_means}};
const std::vector<std::pair<std::string, ThresholdRule>> kRules{
    {"fixed-0", ThresholdRule::fixed_zero},
    {"fixed-1", ThresholdRule::fixed_one},
    {"adaptive", ThresholdRule::adaptive},
    {"lepski", ThresholdRule::lepski}};
const std::vector<std::pair<std::string, BiasMode>> kBiasModes{
    {"global", BiasMode::global}, {"local", BiasMode::local}};

template <typename T>
std::string enum_name(T value,
                      const std::vector<std::pair<std::string, T>>& table) {
  for (const auto& [name, v] : table)
    if (v == value) return name;
  return "?";
}

// shortest decimal text that round-trips the double; byte-stable
std::string fmt(double v) {
  std::ostringstream out;
  out << std::setprecision(17) << v;
  return out.str();
}

std::uint64_t fnv1a_text(const std::string& text) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const unsigned char c : text) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json_text(const std::string& text) {
  json doc = json::parse(text, nullptr, false);
  if (doc.is_discarded()) throw config_error("config is not valid JSON");
  ExperimentConfig c;

  if (doc.contains("graph")) {
    const json& g = doc["graph"];
    if (g.contains("kind"))
      c.graph_kind = parse_enum(g["kind"].get<std::string>(), kGraphKinds,
                                "graph kind");
    c.n = g.value("n", c.n);
    c.k = g.value("k", c.k);
    if (g.contains("block_sizes"))
      c.block_sizes = g["block_sizes"].get<std::vector<std::int32_t>>();
    c.p_in = g.value("p_in", c.p_in);
    c.p_out = g.value("p_out", c.p_out);
    c.graph_seed = g.value("seed", c.graph_seed);
    c.edge_list_path = g.value("path", c.edge_list_path);
  }
  if (doc.contains("units")) {
    const json& u = doc["units"];
    if (u.contains("rule"))
      c.units_rule =
          parse_enum(u["rule"].get<std::string>(), kUnitsRules, "units rule");
    c.units_count = u.value("count", c.units_count);
  }
  if (doc.contains("design")) {
    const json& d = doc["design"];
    if (d.contains("kind"))
      c.design_kind =
          parse_enum(d["kind"].get<std::string>(), kDesignKinds, "design kind");
    c.p = d.value("p", c.p);
    if (d.contains("clusters")) {
      const json& cl = d["clusters"];
      if (cl.contains("source"))
        c.cluster_source = parse_enum(cl["source"].get<std::string>(),
                                      kClusterSources, "cluster source");
      c.cluster_size = cl.value("size", c.cluster_size);
      c.cluster_path = cl.value("path", c.cluster_path);
    }
  }
  if (doc.contains("model")) {
    const json& m = doc["model"];
    c.alpha = m.value("alpha", c.alpha);
    c.beta = m.value("beta", c.beta);
    if (m.contains("f"))
      c.f_kind = parse_enum(m["f"].get<std::string>(), kEffects, "f kind");
    if (m.contains("gamma_over_beta"))
      c.gamma_over_beta = m["gamma_over_beta"].get<std::vector<double>>();
    c.noise_sd = m.value("noise_sd", c.noise_sd);
    c.noise_seed = m.value("noise_seed", c.noise_seed);
  }
  if (doc.contains("probs")) {
    const json& p = doc["probs"];
    if (p.contains("marginals"))
      c.marginals_engine = parse_enum(p["marginals"].get<std::string>(),
                                      kMarginals, "marginals engine");
    if (p.contains("joints"))
      c.joints_engine =
          parse_enum(p["joints"].get<std::string>(), kJoints, "joints engine");
    c.draws = p.value("draws", c.draws);
    c.probs_seed = p.value("seed", c.probs_seed);
  }
  if (doc.contains("grid")) {
    const json& g = doc["grid"];
    if (g.contains("den")) c.grid_den = g["den"].get<int>();
  }
  if (doc.contains("estimators")) {
    c.rules.clear();
    for (const json& r : doc["estimators"]) {
      RuleSpec spec;
      if (r.contains("family"))
        spec.family =
            parse_enum(r["family"].get<std::string>(), kFamilies, "family");
      spec.rule = parse_enum(r.at("rule").get<std::string>(), kRules, "rule");
      if (r.contains("bias_mode"))
        spec.bias_mode = parse_enum(r["bias_mode"].get<std::string>(),
                                    kBiasModes, "bias mode");
      c.rules.push_back(spec);
    }
    if (c.rules.empty()) throw config_error("estimators list is empty");
  }
  if (doc.contains("run")) {
    const json& r = doc["run"];
    c.replicates = r.value("replicates", c.replicates);
    c.master_seed = r.value("seed", c.master_seed);
    c.output_prefix = r.value("output_prefix", c.output_prefix);
  }
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw config_error("cannot open config file: " + path);
  std::ostringstream text;
  text << in.rdbuf();
  return from_json_text(text.str());
}

std::string ExperimentConfig::semantic_json() const {
  json doc;
  doc["graph"] = {{"kind", enum_name(graph_kind, kGraphKinds)}};
  switch (graph_kind) {
    case GraphKind::cycle:
      doc["graph"]["n"] = n;
      doc["graph"]["k"] = k;
      break;
    case GraphKind::sbm:
      doc["graph"]["block_sizes"] = block_sizes;
      doc["graph"]["p_in"] = p_in;
      doc["graph"]["p_out"] = p_out;
      doc["graph"]["seed"] = graph_seed;
      break;
    case GraphKind::edge_list:
      doc["graph"]["path"] = edge_list_path;
      break;
  }
  doc["units"] = {{"rule", enum_name(units_rule, kUnitsRules)},
                  {"count", units_count}};
  doc["design"] = {{"kind", enum_name(design_kind, kDesignKinds)}, {"p", p}};
  if (design_kind == DesignKind::cluster_bernoulli)
    doc["design"]["clusters"] = {
        {"source", enum_name(cluster_source, kClusterSources)},
        {"size", cluster_size},
        {"path", cluster_path}};
  doc["model"] = {{"alpha", alpha},
                  {"beta", beta},
                  {"f", enum_name(f_kind, kEffects)},
                  {"gamma_over_beta", gamma_over_beta},
                  {"noise_sd", noise_sd},
                  {"noise_seed", noise_seed}};
  doc["probs"] = {{"marginals", enum_name(marginals_engine, kMarginals)},
                  {"joints", enum_name(joints_engine, kJoints)},
                  {"draws", draws},
                  {"seed", probs_seed}};
  if (grid_den) doc["grid"] = {{"den", *grid_den}};
  json rules_json = json::array();
  for (const RuleSpec& r : rules)
    rules_json.push_back({{"family", enum_name(r.family, kFamilies)},
                          {"rule", enum_name(r.rule, kRules)},
                          {"bias_mode", enum_name(r.bias_mode, kBiasModes)}});
  doc["estimators"] = rules_json;
  doc["run"] = {{"replicates", replicates}, {"seed", master_seed}};
  return doc.dump();
}

std::string ExperimentConfig::config_hash() const {
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0')
      << fnv1a_text(semantic_json());
  return out.str();
}

namespace {

Graph build_graph(const ExperimentConfig& c) {
  switch (c.graph_kind) {
    case GraphKind::cycle: return kth_power_cycle(c.n, c.k);
    case GraphKind::sbm:
      if (c.block_sizes.empty())
        throw config_error("sbm graph needs block_sizes");
      return sbm(c.block_sizes, c.p_in, c.p_out, c.graph_seed);
    case GraphKind::edge_list:
      if (c.edge_list_path.empty())
        throw config_error("edge_list graph needs a path");
      return read_edge_list_file(c.edge_list_path).graph;
  }
  throw config_error("unreachable graph kind");
}

EstimationSet build_units(const ExperimentConfig& c, const Graph& g) {
  switch (c.units_rule) {
    case UnitsRule::all: return EstimationSet::all(g.n());
    case UnitsRule::non_isolated:
      return EstimationSet::of(non_isolated_subset(g), g.n());
    case UnitsRule::first_non_isolated: {
      auto ids = non_isolated_subset(g);
      if (c.units_count <= 0)
        throw config_error("first_non_isolated needs a positive count");
      if (static_cast<std::int64_t>(ids.size()) < c.units_count)
        throw data_error("graph has fewer non-isolated nodes than requested");
      ids.resize(c.units_count);
      return EstimationSet::of(std::move(ids), g.n());
    }
  }
  throw config_error("unreachable units rule");
}

ThresholdGrid build_grid(const ExperimentConfig& c, const Graph& g) {
  if (c.grid_den) return ThresholdGrid::uniform(*c.grid_den);
  if (g.n() > 0 && g.regular() && g.degree(0) > 0)
    return ThresholdGrid::uniform(g.degree(0));
  return ThresholdGrid::uniform(10);
}

std::string probs_descriptor(const ExperimentConfig& c, const Design& design) {
  return design.describe() +
         "|marginals=" + enum_name(c.marginals_engine, kMarginals) +
         "|joints=" + enum_name(c.joints_engine, kJoints);
}

std::string cache_directory() {
  if (const char* env = std::getenv("ADATHRESH_CACHE_DIR")) return env;
  return ".adathresh-cache";
}

ExposureProbabilities compute_probabilities(const ExperimentConfig& c,
                                            const Graph& g,
                                            const Design& design,
                                            const ThresholdGrid& grid,
                                            int threads) {
  if (c.marginals_engine == MarginalsEngine::exact &&
      design.kind != DesignKind::unit_bernoulli)
    throw config_error("exact marginals exist for unit designs only; "
                       "use mc or enumeration for cluster designs");

  ExposureProbabilities probs;
  switch (c.joints_engine) {
    case JointsEngine::enumeration:
      probs = enumeration_probabilities(g, design, grid);
      break;
    case JointsEngine::mc:
      probs = mc_probabilities(g, design, grid, c.draws, c.probs_seed, threads,
                               /*with_joints=*/true);
      break;
    case JointsEngine::none:
      switch (c.marginals_engine) {
        case MarginalsEngine::exact:
          probs = exact_unit_marginals(g, design.p, grid);
          break;
        case MarginalsEngine::mc:
          probs = mc_probabilities(g, design, grid, c.draws, c.probs_seed,
                                   threads, /*with_joints=*/false);
          break;
        case MarginalsEngine::enumeration:
          probs = enumeration_probabilities(g, design, grid);
          break;
      }
      break;
  }
  if (c.marginals_engine == MarginalsEngine::exact &&
      probs.source == ProbSource::monte_carlo)
    probs = with_exact_marginals(std::move(probs), g, design.p);
  return probs;
}

std::string cache_file_path(const ExperimentConfig& c, const ProbCacheKey& key) {
  json id;
  id["graph_hash"] = key.graph_hash;
  id["design"] = key.design;
  id["draws"] = key.draws;
  id["seed"] = key.seed;
  json gridj = json::array();
  for (const auto& h : key.grid.points) gridj.push_back({h.num, h.den});
  id["grid"] = gridj;
  std::ostringstream name;
  name << "probs_" << std::hex << std::setw(16) << std::setfill('0')
       << fnv1a_text(id.dump()) << ".bin";
  (void)c;
  return (std::filesystem::path(cache_directory()) / name.str()).string();
}

}  // namespace

ExperimentContext build_context(const ExperimentConfig& config, int threads,
                                bool use_cache) {
  ExperimentContext ctx;
  ctx.graph = build_graph(config);

  if (config.design_kind == DesignKind::cluster_bernoulli) {
    switch (config.cluster_source) {
      case ClusterSource::contiguous:
        ctx.clustering = std::make_shared<Clustering>(
            contiguous_clusters(ctx.graph, config.cluster_size));
        break;
      case ClusterSource::file:
        ctx.clustering = std::make_shared<Clustering>(
            load_clusters_file(config.cluster_path, ctx.graph));
        break;
      case ClusterSource::none:
        throw config_error("cluster design needs a cluster source");
    }
    ctx.design = Design::cluster_bernoulli(config.p, ctx.clustering);
  } else {
    ctx.design = Design::unit_bernoulli(config.p);
  }

  ctx.set = build_units(config, ctx.graph);
  ctx.grid = build_grid(config, ctx.graph);

  ProbCacheKey key{ctx.graph.hash(), probs_descriptor(config, ctx.design),
                   ctx.grid, config.draws, config.probs_seed};
  bool loaded = false;
  const std::string path = cache_file_path(config, key);
  if (use_cache) {
    if (auto cached = load_probabilities(key, path)) {
      ctx.probs = std::move(*cached);
      loaded = true;
    } else if (std::filesystem::exists(path)) {
      std::cerr << "warning: probability cache key mismatch at " << path
                << "; recomputing\n";
    }
  }
  if (!loaded) {
    ctx.probs =
        compute_probabilities(config, ctx.graph, ctx.design, ctx.grid, threads);
    if (use_cache) {
      std::error_code ec;
      std::filesystem::create_directories(cache_directory(), ec);
      if (!ec) save_probabilities(ctx.probs, key, path);
    }
  }

  ctx.epsilon.assign(ctx.graph.n(), 0.0);
  if (config.noise_sd != 0.0) {
    const std::uint64_t s =
        purpose_seed(config.noise_seed, rng_purpose::kNoise);
    for (std::int32_t i = 0; i < ctx.graph.n(); ++i)
      ctx.epsilon[i] = config.noise_sd * standard_normal(s, 0, i);
  }
  return ctx;
}

std::string precompute_probabilities(const ExperimentConfig& config,
                                     int threads) {
  ExperimentContext ctx = build_context(config, threads, /*use_cache=*/true);
  ProbCacheKey key{ctx.graph.hash(), probs_descriptor(config, ctx.design),
                   ctx.grid, config.draws, config.probs_seed};
  return cache_file_path(config, key);
}

namespace {

OutcomeModel model_for(const ExperimentConfig& c,
                       const ExperimentContext& ctx, double ratio) {
  OutcomeModel m;
  m.alpha = c.alpha;
  m.beta = c.beta;
  m.gamma = ratio * c.beta;
  m.f_kind = c.f_kind;
  m.epsilon = ctx.epsilon;
  return m;
}

struct ReplicateOutcome {
  bool ok = false;
  std::size_t chosen = 0;
  double tau_hat = 0.0;
};

}  // namespace

ExperimentOutput run_experiment(const ExperimentConfig& config, int threads) {
  const auto started = std::chrono::steady_clock::now();
  ExperimentContext ctx = build_context(config, threads);
  const auto& rules = config.rules;
  const std::size_t n_g = config.gamma_over_beta.size();
  const std::size_t n_rep = static_cast<std::size_t>(config.replicates);
  const std::size_t n_rules = rules.size();
  if (n_g == 0) throw config_error("gamma_over_beta list is empty");
  if (n_rep == 0) throw config_error("replicates must be >= 1");

  std::vector<OutcomeModel> models;
  std::vector<double> taus;
  for (const double ratio : config.gamma_over_beta) {
    models.push_back(model_for(config, ctx, ratio));
    const double tau = true_ate(models.back());
    if (tau == 0.0)
      throw data_error("true ATE is zero; normalized RMSE undefined");
    taus.push_back(tau);
  }

  // which (family, bias_mode) combinations need a full profile
  std::vector<std::pair<Family, BiasMode>> profile_kinds;
  for (const RuleSpec& r : rules)
    if (r.rule == ThresholdRule::adaptive || r.rule == ThresholdRule::lepski) {
      const std::pair<Family, BiasMode> kind{r.family, r.bias_mode};
      if (std::find(profile_kinds.begin(), profile_kinds.end(), kind) ==
          profile_kinds.end())
        profile_kinds.push_back(kind);
    }

  std::vector<ReplicateOutcome> slots(n_g * n_rep * n_rules);
  const std::int64_t tasks = static_cast<std::int64_t>(n_g * n_rep);

  detail::parallel_chunks(tasks, threads, [&](int, std::int64_t begin,
                                              std::int64_t end) {
    for (std::int64_t task = begin; task < end; ++task) {
      const std::size_t gi = static_cast<std::size_t>(task) / n_rep;
      const std::size_t r = static_cast<std::size_t>(task) % n_rep;
      const std::uint64_t cell_seed =
          key_bits(purpose_seed(config.master_seed, rng_purpose::kGammaCell),
                   0, gi);
      const Assignment a = sample_assignment(ctx.design, ctx.graph, cell_seed,
                                             static_cast<std::int64_t>(r));
      const ExposureProfile e =
          exposure_fractions(ctx.graph, a, IsolatedPolicy::drop);
      const OutcomeVector y = evaluate(models[gi], a, e);

      // one profile per (family, bias mode), shared by adaptive and lepski
      std::map<std::pair<Family, BiasMode>, std::optional<MseProfile>> profiles;
      for (const auto& kind : profile_kinds) {
        try {
          profiles[kind] = mse_profile(y, a, e, &ctx.probs, ctx.grid,
                                       kind.first, kind.second, ctx.set);
        } catch (const data_error&) {
          profiles[kind] = std::nullopt;
        }
      }

      for (std::size_t ri = 0; ri < n_rules; ++ri) {
        const RuleSpec& rule = rules[ri];
        ReplicateOutcome& slot =
            slots[(gi * n_rep + r) * n_rules + ri];
        try {
          switch (rule.rule) {
            case ThresholdRule::fixed_zero:
            case ThresholdRule::fixed_one: {
              const std::size_t kk =
                  rule.rule == ThresholdRule::fixed_zero ? 0
                                                         : ctx.grid.size() - 1;
              slot.tau_hat =
                  rule.family == Family::horvitz_thompson
                      ? ht_estimate(y, a, e, ctx.probs, kk, ctx.set)
                      : dim_estimate(y, a, e, ctx.grid[kk], ctx.set);
              slot.chosen = kk;
              slot.ok = true;
              break;
            }
            case ThresholdRule::adaptive: {
              const auto& profile = profiles[{rule.family, rule.bias_mode}];
              if (!profile) break;
              slot.chosen = profile->selected;
              slot.tau_hat = profile->at[slot.chosen].tau;
              slot.ok = true;
              break;
            }
            case ThresholdRule::lepski: {
              const auto& profile = profiles[{rule.family, rule.bias_mode}];
              if (!profile) break;
              slot.chosen = lepski_select(*profile);
              slot.tau_hat = profile->at[slot.chosen].tau;
              slot.ok = true;
              break;
            }
          }
        } catch (const data_error&) {
          slot.ok = false;
        }
      }
    }
  });

  // sequential aggregation in task order: identical for any worker count
  ExperimentOutput out;
  out.log.reserve(slots.size());
  for (std::size_t gi = 0; gi < n_g; ++gi) {
    for (std::size_t r = 0; r < n_rep; ++r) {
      for (std::size_t ri = 0; ri < n_rules; ++ri) {
        const ReplicateOutcome& slot = slots[(gi * n_rep + r) * n_rules + ri];
        ReplicateRow row;
        row.gamma_over_beta = config.gamma_over_beta[gi];
        row.replicate = static_cast<std::int64_t>(r);
        row.rule = rules[ri];
        row.ok = slot.ok;
        if (slot.ok) {
          row.h = ctx.grid[slot.chosen];
          row.tau_hat = slot.tau_hat;
          row.err_norm = (slot.tau_hat - taus[gi]) / taus[gi];
        }
        out.log.push_back(row);
      }
    }
  }

  for (std::size_t gi = 0; gi < n_g; ++gi) {
    for (std::size_t ri = 0; ri < n_rules; ++ri) {
      ResultRow row;
      row.gamma_over_beta = config.gamma_over_beta[gi];
      row.rule = rules[ri];
      double sum_sq = 0.0, sum_abs = 0.0, sum_abs_sq = 0.0, sum_h = 0.0;
      std::int64_t done = 0, failures = 0;
      for (std::size_t r = 0; r < n_rep; ++r) {
        const ReplicateRow& rep = out.log[(gi * n_rep + r) * n_rules + ri];
        if (!rep.ok) {
          ++failures;
          continue;
        }
        ++done;
        sum_sq += rep.err_norm * rep.err_norm;
        sum_abs += std::abs(rep.err_norm);
        sum_abs_sq += rep.err_norm * rep.err_norm;
        sum_h += rep.h.value();
      }
      row.replicates_done = done;
      row.failures = failures;
      if (done > 0) {
        row.rmse_norm = std::sqrt(sum_sq / done);
        const double mean_abs = sum_abs / done;
        const double var_abs =
            std::max(sum_abs_sq / done - mean_abs * mean_abs, 0.0);
        row.band_2sd = 2.0 * std::sqrt(var_abs);
        row.mean_h = sum_h / done;
      }
      out.rows.push_back(row);
    }
  }

  // CSVs
  {
    std::ostringstream csv;
    csv << "gamma_over_beta,family,rule,bias_mode,rmse_norm,band_2sd,"
           "replicates,failures,mean_h\n";
    for (const ResultRow& row : out.rows) {
      csv << fmt(row.gamma_over_beta) << ','
          << enum_name(row.rule.family, kFamilies) << ','
          << enum_name(row.rule.rule, kRules) << ','
          << enum_name(row.rule.bias_mode, kBiasModes) << ','
          << fmt(row.rmse_norm) << ',' << fmt(row.band_2sd) << ','
          << row.replicates_done << ',' << row.failures << ','
          << fmt(row.mean_h) << '\n';
    }
    out.results_csv = csv.str();
  }
  {
    std::ostringstream csv;
    csv << "gamma_over_beta,replicate,family,rule,bias_mode,ok,h,tau_hat,"
           "err_norm\n";
    for (const ReplicateRow& row : out.log) {
      csv << fmt(row.gamma_over_beta) << ',' << row.replicate << ','
          << enum_name(row.rule.family, kFamilies) << ','
          << enum_name(row.rule.rule, kRules) << ','
          << enum_name(row.rule.bias_mode, kBiasModes) << ','
          << (row.ok ? 1 : 0) << ',';
      if (row.ok)
        csv << row.h.str() << ',' << fmt(row.tau_hat) << ','
            << fmt(row.err_norm);
      else
        csv << ",,";
      csv << '\n';
    }
    out.replicates_csv = csv.str();
  }
  {
    const auto elapsed = std::chrono::duration<double>(
                             std::chrono::steady_clock::now() - started)
                             .count();
    json meta;
    meta["config_hash"] = config.config_hash();
    meta["tool"] = "adathresh";
    meta["version"] = "0.1.0";
    meta["n"] = ctx.graph.n();
    meta["edges"] = ctx.graph.edge_count();
    meta["d_max"] = ctx.graph.d_max();
    meta["estimation_units"] = ctx.set.size();
    if (ctx.clustering) meta["s_max"] = ctx.clustering->s_max;
    json gridj = json::array();
    for (const auto& h : ctx.grid.points) gridj.push_back(h.str());
    meta["grid"] = gridj;
    meta["probs_source"] = to_string(ctx.probs.source);
    meta["probs_draws"] = ctx.probs.draws;
    meta["dependent_pairs"] = ctx.probs.pairs.size();
    meta["runtime_seconds"] = elapsed;
    out.metadata_json = meta.dump(2);
  }
  return out;
}

void write_outputs(const ExperimentOutput& out, const std::string& prefix) {
  const std::filesystem::path base(prefix);
  if (base.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(base.parent_path(), ec);
  }
  const auto write = [](const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot write output file: " + path);
    f << text;
  };
  write(prefix + "_results.csv", out.results_csv);
  write(prefix + "_replicates.csv", out.replicates_csv);
  write(prefix + "_meta.json", out.metadata_json);
}

std::string profile_csv(const MseProfile& profile, std::int64_t replicate) {
  std::ostringstream csv;
  csv << "replicate,family,rule,h,tau_hat,bias_hat,var_hat,mse_hat,selected,"
         "method,rmse_over_ate\n";
  for (std::size_t k = 0; k < profile.grid.size(); ++k) {
    const ThresholdStats& s = profile.at[k];
    if (!s.feasible) continue;
    csv << replicate << ',' << to_string(profile.family) << ",adaptive,"
        << profile.grid[k].str() << ',' << fmt(s.tau) << ','
        << fmt(s.bias_hat) << ',' << fmt(s.var_hat) << ',' << fmt(s.mse_hat)
        << ',' << (k == profile.selected ? 1 : 0) << ",estimate,\n";
  }
  return csv.str();
}

std::string profile_json(const MseProfile& profile) {
  json doc;
  doc["family"] = to_string(profile.family);
  doc["bias_mode"] = to_string(profile.bias_mode);
  doc["gamma_hat"] = profile.gamma_hat;
  doc["selected_h"] = profile.selected_h().str();
  doc["zero_joint_cells"] = profile.diagnostics.zero_joint_cells;
  json rows = json::array();
  for (std::size_t k = 0; k < profile.grid.size(); ++k) {
    const ThresholdStats& s = profile.at[k];
    json row;
    row["h"] = profile.grid[k].str();
    row["feasible"] = s.feasible;
    if (s.feasible) {
      row["tau_hat"] = s.tau;
      row["bias_hat"] = s.bias_hat;
      row["var_hat"] = s.var_hat;
      row["mse_hat"] = s.mse_hat;
      row["selected"] = k == profile.selected;
    }
    rows.push_back(row);
  }
  doc["thresholds"] = rows;
  return doc.dump(2);
}

std::string report_json(const EstimatorReport& report) {
  json doc;
  doc["family"] = to_string(report.family);
  doc["rule"] = to_string(report.rule);
  doc["estimate"] = report.estimate;
  doc["h"] = report.chosen_h.str();
  doc["dropped_units"] = report.dropped_units;
  doc["zero_probability_cells"] = report.zero_probability_cells;
  return doc.dump(2);
}

std::string oracle_csv(const OracleProfile& profile, Family family) {
  std::ostringstream csv;
  csv << "replicate,family,rule,h,tau_hat,bias_hat,var_hat,mse_hat,selected,"
         "method,rmse_over_ate\n";
  for (std::size_t k = 0; k < profile.grid.size(); ++k) {
    const OracleStats& s = profile.at[k];
    if (!s.feasible) continue;
    csv << "0," << to_string(family) << ",oracle," << profile.grid[k].str()
        << ',' << fmt(profile.tau + s.bias) << ',' << fmt(s.bias) << ','
        << fmt(s.var) << ',' << fmt(s.mse) << ','
        << (k == profile.h_star ? 1 : 0) << ',' << to_string(profile.method)
        << ',' << fmt(s.rmse_over_ate) << '\n';
  }
  return csv.str();
}

namespace {

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"adaptive exposure-threshold estimation on interference networks"};
  app.require_subcommand(1);
  app.fallthrough();  // allow --threads after the subcommand name
  int threads = 0;
  app.add_option("--threads", threads,
                 "worker cap (0 = hardware); results do not depend on it");

  // gen-graph
  auto* gen = app.add_subcommand("gen-graph", "write a graph as an edge list");
  std::string gen_kind = "cycle", gen_out = "-";
  std::int32_t gen_n = 1000;
  int gen_k = 2;
  std::vector<std::int32_t> gen_blocks;
  double gen_p_in = 0.5, gen_p_out = 0.01;
  std::uint64_t gen_seed = 1;
  gen->add_option("--kind", gen_kind, "cycle | sbm")->capture_default_str();
  gen->add_option("--n", gen_n, "node count (cycle)")->capture_default_str();
  gen->add_option("--k", gen_k, "cycle power")->capture_default_str();
  gen->add_option("--block-sizes", gen_blocks, "sbm block sizes");
  gen->add_option("--p-in", gen_p_in, "sbm intra-block probability");
  gen->add_option("--p-out", gen_p_out, "sbm inter-block probability");
  gen->add_option("--seed", gen_seed, "sbm seed");
  gen->add_option("--out", gen_out, "output path, '-' for stdout");

  // probs
  auto* probs_cmd =
      app.add_subcommand("probs", "precompute the exposure probability table");
  std::string probs_config;
  probs_cmd->add_option("--config", probs_config, "config file")->required();

  // estimate
  auto* est = app.add_subcommand("estimate", "run one rule on one dataset");
  std::string est_config, est_family = "ht", est_rule = "adaptive",
              est_bias = "global", est_profile_out;
  std::size_t est_gamma_index = 0;
  std::int64_t est_replicate = 0;
  est->add_option("--config", est_config, "config file")->required();
  est->add_option("--family", est_family, "ht | dim")->capture_default_str();
  est->add_option("--rule", est_rule, "fixed-0 | fixed-1 | adaptive | lepski")
      ->capture_default_str();
  est->add_option("--bias-mode", est_bias, "global | local")
      ->capture_default_str();
  est->add_option("--gamma-index", est_gamma_index,
                  "index into gamma_over_beta");
  est->add_option("--replicate", est_replicate, "replicate index");
  est->add_option("--profile-out", est_profile_out,
                  "write the per-threshold profile here "
                  "(.json for JSON, CSV otherwise)");
  bool est_json = false;
  est->add_flag("--json", est_json, "emit the report as JSON");

  // experiment
  auto* exp = app.add_subcommand("experiment", "run the configured sweep");
  std::string exp_config, exp_prefix;
  exp->add_option("--config", exp_config, "config file")->required();
  exp->add_option("--out-prefix", exp_prefix, "override run.output_prefix");

  // oracle
  auto* orc = app.add_subcommand("oracle", "ground-truth MSE per threshold");
  std::string orc_config, orc_method = "mc", orc_out = "-";
  std::size_t orc_gamma_index = 0;
  std::int64_t orc_replicates = 1000;
  std::uint64_t orc_seed = 7;
  orc->add_option("--config", orc_config, "config file")->required();
  orc->add_option("--method", orc_method, "exact | mc")->capture_default_str();
  orc->add_option("--gamma-index", orc_gamma_index,
                  "index into gamma_over_beta");
  orc->add_option("--replicates", orc_replicates, "mc oracle replicates");
  orc->add_option("--seed", orc_seed, "mc oracle seed");
  orc->add_option("--out", orc_out, "output path, '-' for stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);  // prints usage or the error message
    return code == 0 ? 0 : 1;
  }

  const auto emit = [](const std::string& path, const std::string& text) {
    if (path == "-") {
      std::cout << text;
      return;
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw config_error("cannot write: " + path);
    f << text;
  };

  if (gen->parsed()) {
    Graph g;
    if (gen_kind == "cycle") {
      g = kth_power_cycle(gen_n, gen_k);
    } else if (gen_kind == "sbm") {
      if (gen_blocks.empty()) throw config_error("sbm needs --block-sizes");
      g = sbm(gen_blocks, gen_p_in, gen_p_out, gen_seed);
    } else {
      throw config_error("unknown graph kind: " + gen_kind);
    }
    std::ostringstream text;
    write_edge_list(g, text);
    emit(gen_out, text.str());
    return 0;
  }

  if (probs_cmd->parsed()) {
    const ExperimentConfig config = ExperimentConfig::from_file(probs_config);
    std::cout << precompute_probabilities(config, threads) << "\n";
    return 0;
  }

  if (est->parsed()) {
    const ExperimentConfig config = ExperimentConfig::from_file(est_config);
    if (est_gamma_index >= config.gamma_over_beta.size())
      throw config_error("gamma index out of range");
    const ExperimentContext ctx = build_context(config, threads);
    const OutcomeModel model =
        model_for(config, ctx, config.gamma_over_beta[est_gamma_index]);
    const std::uint64_t cell_seed =
        key_bits(purpose_seed(config.master_seed, rng_purpose::kGammaCell), 0,
                 est_gamma_index);
    const Assignment a =
        sample_assignment(ctx.design, ctx.graph, cell_seed, est_replicate);
    const ExposureProfile e =
        exposure_fractions(ctx.graph, a, IsolatedPolicy::drop);
    const OutcomeVector y = evaluate(model, a, e);
    const Family family = parse_enum(est_family, kFamilies, "family");
    const ThresholdRule rule = parse_enum(est_rule, kRules, "rule");
    const BiasMode bias = parse_enum(est_bias, kBiasModes, "bias mode");
    const EstimatorReport report = estimate_with_rule(
        rule, family, bias, y, a, e, &ctx.probs, ctx.grid, ctx.set);
    if (est_json) {
      std::cout << report_json(report) << "\n";
    } else {
      std::cout << "family=" << to_string(report.family)
                << " rule=" << to_string(report.rule)
                << " h=" << report.chosen_h.str()
                << " tau_hat=" << fmt(report.estimate)
                << " tau=" << fmt(true_ate(model))
                << " dropped_units=" << report.dropped_units
                << " zero_probability_cells=" << report.zero_probability_cells
                << "\n";
    }
    if (!est_profile_out.empty()) {
      const MseProfile profile = mse_profile(y, a, e, &ctx.probs, ctx.grid,
                                             family, bias, ctx.set);
      emit(est_profile_out, est_profile_out.ends_with(".json")
                                ? profile_json(profile)
                                : profile_csv(profile, est_replicate));
    }
    return 0;
  }

  if (exp->parsed()) {
    ExperimentConfig config = ExperimentConfig::from_file(exp_config);
    if (!exp_prefix.empty()) config.output_prefix = exp_prefix;
    const ExperimentOutput out = run_experiment(config, threads);
    write_outputs(out, config.output_prefix);
    std::cout << config.output_prefix << "_results.csv\n";
    return 0;
  }

  if (orc->parsed()) {
    const ExperimentConfig config = ExperimentConfig::from_file(orc_config);
    if (orc_gamma_index >= config.gamma_over_beta.size())
      throw config_error("gamma index out of range");
    const ExperimentContext ctx = build_context(config, threads);
    const OutcomeModel model =
        model_for(config, ctx, config.gamma_over_beta[orc_gamma_index]);
    const Family family = config.rules.empty()
                              ? Family::horvitz_thompson
                              : config.rules.front().family;
    OracleProfile profile;
    if (orc_method == "exact") {
      const ExposureProbabilities exact =
          enumeration_probabilities(ctx.graph, ctx.design, ctx.grid);
      profile = exact_mse(ctx.graph, ctx.design, model, exact, ctx.grid,
                          family, ctx.set);
    } else if (orc_method == "mc") {
      profile = mc_mse(ctx.graph, ctx.design, model, ctx.probs, ctx.grid,
                       orc_replicates, orc_seed, family, ctx.set, threads);
    } else {
      throw config_error("unknown oracle method: " + orc_method);
    }
    emit(orc_out, oracle_csv(profile, family));
    return 0;
  }

  return 0;
}

}  // namespace

int cli_main(int argc, const char* const* argv) {
  try {
    return run_cli(argc, argv);
  } catch (const config_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 1;
  } catch (const data_error& err) {
    std::cerr << "error: " << err.what() << "\n";
    return 2;
  } catch (const std::exception& err) {
    std::cerr << "unexpected error: " << err.what() << "\n";
    return 2;
  }
}

}  // namespace adathresh
