#include "app.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <mutex>

#include <CLI11.hpp>

#include "betatess/error.hpp"
#include "betatess/flower_phi.hpp"
#include "betatess/io.hpp"
#include "betatess/point_process.hpp"
#include "betatess/statistics.hpp"
#include "betatess/tessellation.hpp"

namespace tess {

using namespace betatess;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kExperiments = {"sample",      "tessellate",  "typical-cells", "gamma-test",
                                               "independence", "height-tail", "degree-tail",   "max-degree",
                                               "phi"};

const std::map<std::string, std::string> kAliases = {
    {"kappa", "model.kappa"},
    {"beta", "model.beta"},
    {"gamma", "model.gamma"},
    {"d", "model.d"},
    {"box", "domain.box"},
    {"padding", "domain.padding"},
    {"hmax", "domain.hmax"},
    {"h_max", "domain.hmax"},
    {"eps", "domain.eps"},
    {"far_depth", "domain.far_depth"},
    {"far_padding", "domain.far_padding"},
    {"risk_budget", "domain.risk_budget"},
    {"leak_budget", "domain.leak_budget"},
    {"max_refinements", "tessellation.max_refinements"},
    {"max_points", "tessellation.max_points"},
    {"seed", "seeds"},
    {"out", "output_dir"},
    {"output", "output_dir"},
};

[[noreturn]] void config_error(const std::string& msg) { throw Error(ErrorCode::ConfigError, msg); }

bool same_kind(const json& def, const json& val) {
  if (def.is_number()) return val.is_number();
  return def.type() == val.type();
}

void merge_checked(json& base, const json& user, const std::string& prefix) {
  if (!user.is_object()) config_error("config must be a JSON object");
  for (auto it = user.begin(); it != user.end(); ++it) {
    const std::string key = prefix + it.key();
    if (!base.contains(it.key())) config_error("unknown config key '" + key + "'");
    json& slot = base[it.key()];
    if (slot.is_object()) {
      merge_checked(slot, it.value(), key + ".");
      continue;
    }
    if (!same_kind(slot, it.value())) config_error("config key '" + key + "' has the wrong type");
    if (slot.is_number_integer() && !it.value().is_number_integer())
      config_error("config key '" + key + "' must be an integer");
    slot = it.value();
  }
}

json::json_pointer pointer_for(std::string key) {
  std::replace(key.begin(), key.end(), '-', '_');
  if (auto it = kAliases.find(key); it != kAliases.end()) key = it->second;
  std::string ptr = "/" + key;
  std::replace(ptr.begin(), ptr.end(), '.', '/');
  return json::json_pointer(ptr);
}

ModelParams model_of(const json& cfg) {
  const json& m = cfg["model"];
  return {m["kappa"].get<int>(), m["beta"].get<double>(), m["gamma"].get<double>(), m["d"].get<int>()};
}

DomainOptions domain_options_of(const json& cfg) {
  const json& d = cfg["domain"];
  DomainOptions o;
  o.inner_side = d["box"].get<double>();
  o.padding = d["padding"].get<double>();
  o.h_max = d["hmax"].get<double>();
  o.eps = d["eps"].get<double>();
  o.far_depth = d["far_depth"].get<double>();
  o.far_padding = d["far_padding"].get<double>();
  o.risk_budget = d["risk_budget"].get<double>();
  o.leak_budget = d["leak_budget"].get<double>();
  return o;
}

TessellationOptions tessellation_options_of(const json& cfg) {
  TessellationOptions o;
  o.max_refinements = cfg["tessellation"]["max_refinements"].get<int>();
  o.max_points = cfg["tessellation"]["max_points"].get<double>();
  o.leak_budget = cfg["domain"]["leak_budget"].get<double>();
  return o;
}

json box_json(const Box& b) {
  return {{"lo", std::vector<double>(b.lo.data(), b.lo.data() + b.lo.size())},
          {"hi", std::vector<double>(b.hi.data(), b.hi.data() + b.hi.size())}};
}

json domain_json(const SampleDomain& dom) {
  json j = {{"box", box_json(dom.box)}, {"inner_box", box_json(dom.inner_box)}, {"h_max", dom.h_max},
            {"eps", dom.eps}, {"far_depth", dom.far_depth}};
  if (dom.has_far_tier()) j["far_box"] = box_json(dom.far_box);
  return j;
}

json constants_json(const ModelParams& p, int n) {
  return {{"c_d_plus_1_beta", normalizing_constant(p)},
          {"c_d_beta", normalizing_constant_d(p)},
          {"added_vertex_constant", added_vertex_constant(p)},
          {"homogeneity", p.homogeneity()},
          {"gamma_shape_param", gamma_shape_param(std::max(n, p.d + 1), p)}};
}

double median(std::vector<double> x) {
  if (x.empty()) return std::nan("");
  std::sort(x.begin(), x.end());
  const std::size_t m = x.size() / 2;
  return x.size() % 2 ? x[m] : 0.5 * (x[m - 1] + x[m]);
}

std::string run_tag(std::uint64_t seed, int rep) { return std::to_string(seed) + "_" + std::to_string(rep); }

// Output bookkeeping: every data file with its row count and hash.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}
  const fs::path& dir() const { return dir_; }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  void add(const std::string& name, long long rows = -1) {
    const std::string p = path(name);
    if (rows < 0 && name.size() > 4 && name.substr(name.size() - 4) == ".csv") rows = csv_row_count(p);
    json e = {{"file", name}, {"fnv1a64", fnv1a_file(p)}};
    if (rows >= 0) e["rows"] = rows;
    std::lock_guard<std::mutex> lock(m_);
    files_.push_back(e);
  }

  void write_json(const std::string& name, const json& j) {
    std::ofstream out(path(name), std::ios::binary);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path(name));
    out << j.dump(2) << '\n';
    out.close();
    add(name);
  }

  // Files sorted by name, so the manifest does not depend on completion order.
  json list() const {
    json l = files_;
    std::sort(l.begin(), l.end(), [](const json& a, const json& b) { return a["file"] < b["file"]; });
    return l;
  }

  std::string fingerprint() const {
    std::uint64_t h = fnv1a(kVersion);
    for (const auto& e : list()) h = fnv1a(e["file"].get<std::string>() + ":" + e["fnv1a64"].get<std::string>(), h);
    return hex64(h);
  }

 private:
  fs::path dir_;
  std::mutex m_;
  json files_ = json::array();
};

struct Context {
  json cfg;
  ModelParams p;
  DomainOptions dopt;
  TessellationOptions topt;
  SampleDomain dom;
  std::vector<std::uint64_t> seeds;
  int replicates = 1;
  int workers = 1;
  json runs = json::array();
};

json run_summary(const Tessellation& t) {
  long long certified = 0, bounded = 0;
  for (const auto& c : t.cells) {
    bounded += c.status == CellStatus::Bounded;
    certified += c.certified;
  }
  return {{"seed", t.sample.seed},          {"replicate", t.sample.replicate},
          {"points", t.sample.size()},      {"simplices", t.tri.simplex_count()},
          {"cells", t.cells.size()},        {"bounded", bounded},
          {"certified", certified},         {"discarded", t.discarded},
          {"refinements", t.refinements},   {"point_cap_hit", t.point_cap_hit},
          {"jittered", t.tri.jittered},     {"final_eps", t.sample.domain.eps}};
}

// Tessellates every (seed, replicate) pair; on_run is called from worker threads.
void simulate(Context& ctx, const std::function<void(int, const Tessellation&)>& on_run) {
  const int R = ctx.replicates;
  const int total = static_cast<int>(ctx.seeds.size()) * R;
  std::vector<json> summaries(total);
  parallel_for(total, ctx.workers, [&](int i) {
    const Tessellation t = tessellate(sample_points(ctx.p, ctx.dom, ctx.seeds[i / R], i % R), ctx.topt);
    summaries[i] = run_summary(t);
    on_run(i, t);
  });
  for (auto& s : summaries) ctx.runs.push_back(s);
}

struct ObservationSet {
  std::vector<TypicalCellObservation> obs;
  // Inner volume behind the observations of each seed.
  std::map<std::uint64_t, double> volume;
};

ObservationSet observations(Context& ctx, Outputs& out) {
  ObservationSet set;
  const std::string input = ctx.cfg["input"].get<std::string>();
  if (!input.empty()) {
    set.obs = read_observations_csv(input);
    const double vol = ctx.cfg["volume"].get<double>();
    std::map<std::uint64_t, std::map<int, bool>> windows;
    for (const auto& o : set.obs) windows[o.seed][o.window_id] = true;
    for (const auto& [seed, w] : windows) set.volume[seed] = vol * w.size();
    return set;
  }
  const DensityTable table(ctx.p);
  const int R = ctx.replicates;
  std::vector<std::vector<TypicalCellObservation>> parts(ctx.seeds.size() * R);
  simulate(ctx, [&](int i, const Tessellation& t) { parts[i] = collect_typical_cells(t, table, i % R); });
  for (auto& part : parts) set.obs.insert(set.obs.end(), part.begin(), part.end());
  sort_observations(set.obs);
  for (auto s : ctx.seeds) set.volume[s] = ctx.dom.inner_box.volume() * R;
  write_observations_csv(out.path("observations.csv"), set.obs);
  out.add("observations.csv", static_cast<long long>(set.obs.size()));
  return set;
}

std::map<std::uint64_t, std::vector<TypicalCellObservation>> by_seed(const std::vector<TypicalCellObservation>& obs) {
  std::map<std::uint64_t, std::vector<TypicalCellObservation>> g;
  for (const auto& o : obs) g[o.seed].push_back(o);
  return g;
}

json model_json(const ModelParams& p) {
  return {{"kappa", p.kappa}, {"beta", p.beta}, {"gamma", p.gamma}, {"d", p.d}};
}

// Experiments. Each returns the outcome and registers its files.

Outcome do_sample(Context& ctx, Outputs& out) {
  const int R = ctx.replicates;
  const int total = static_cast<int>(ctx.seeds.size()) * R;
  std::vector<json> summaries(total);
  parallel_for(total, ctx.workers, [&](int i) {
    const PointSample s = sample_points(ctx.p, ctx.dom, ctx.seeds[i / R], i % R);
    const std::string name = "points_" + run_tag(s.seed, i % R) + ".csv";
    write_points_csv(out.path(name), s);
    out.add(name, s.size());
    summaries[i] = {{"seed", s.seed}, {"replicate", i % R}, {"points", s.size()}};
  });
  for (auto& s : summaries) ctx.runs.push_back(s);
  return {};
}

Outcome do_tessellate(Context& ctx, Outputs& out) {
  simulate(ctx, [&](int i, const Tessellation& t) {
    const std::string tag = run_tag(t.sample.seed, i % ctx.replicates);
    write_points_csv(out.path("points_" + tag + ".csv"), t.sample);
    out.add("points_" + tag + ".csv", t.sample.size());
    write_simplices_csv(out.path("simplices_" + tag + ".csv"), t.tri);
    out.add("simplices_" + tag + ".csv", t.tri.simplex_count());
    out.add("cells_" + tag + ".csv", write_cells_csv(out.path("cells_" + tag + ".csv"), t));
  });
  return {};
}

Outcome do_typical_cells(Context& ctx, Outputs& out) {
  const ObservationSet set = observations(ctx, out);
  Outcome r;
  r.report = {{"test", "typical-cells"}, {"params", model_json(ctx.p)}, {"observations", set.obs.size()}};
  return r;
}

Outcome do_gamma_test(Context& ctx, Outputs& out) {
  const ObservationSet set = observations(ctx, out);
  const int n = ctx.cfg["n"].get<int>();
  json seeds = json::array();
  std::vector<double> ratio, dist, pv, crit;
  for (const auto& [seed, obs] : by_seed(set.obs)) {
    const GammaTestReport g = ks_gamma_test(obs, ctx.p, n);
    seeds.push_back({{"seed", seed}, {"sample_size", g.sample_size}, {"ks_distance", g.ks_distance},
                     {"critical_value", g.critical_value}, {"p_value", g.p_value}, {"pass", g.pass},
                     {"bin_edges", g.bin_edges}, {"counts", g.counts}});
    ratio.push_back(g.ks_distance / g.critical_value);
    dist.push_back(g.ks_distance);
    pv.push_back(g.p_value);
    crit.push_back(g.critical_value);
  }
  if (seeds.empty()) throw Error(ErrorCode::InsufficientSample, "no observations for the gamma test");
  Outcome r;
  r.gated = true;
  r.pass = median(ratio) < 1;
  json params = model_json(ctx.p);
  params["n"] = n;
  params["shape_param"] = gamma_shape_param(n, ctx.p);
  r.report = {{"test", "gamma-test"}, {"params", params},          {"statistic", median(dist)},
              {"critical_value", median(crit)}, {"p_value", median(pv)}, {"pass", r.pass},
              {"seeds", seeds}};
  return r;
}

Outcome do_independence(Context& ctx, Outputs& out) {
  const ObservationSet set = observations(ctx, out);
  const int n = ctx.cfg["n"].get<int>();
  const Descriptor desc = descriptor_from_string(ctx.cfg["descriptor"].get<std::string>());
  const int perms = ctx.cfg["permutations"].get<int>();
  const double alpha = ctx.cfg["alpha"].get<double>();
  json seeds = json::array();
  std::vector<double> pv, rho;
  for (const auto& [seed, obs] : by_seed(set.obs)) {
    Rng rng(seed, 0, 0x1d);
    const IndependenceReport rep = independence_test(obs, n, desc, rng, perms);
    seeds.push_back({{"seed", seed}, {"sample_size", rep.sample_size}, {"spearman", rep.spearman},
                     {"p_value", rep.p_value}, {"pass", rep.p_value > alpha}});
    pv.push_back(rep.p_value);
    rho.push_back(rep.spearman);
  }
  if (seeds.empty()) throw Error(ErrorCode::InsufficientSample, "no observations for the independence test");
  Outcome r;
  r.gated = true;
  r.pass = median(pv) > alpha;
  json params = model_json(ctx.p);
  params["n"] = n;
  params["descriptor"] = to_string(desc);
  params["permutations"] = perms;
  params["alpha"] = alpha;
  r.report = {{"test", "independence"}, {"params", params}, {"statistic", median(rho)},
              {"p_value", median(pv)},  {"pass", r.pass},   {"seeds", seeds}};
  return r;
}

std::vector<double> height_grid(const Context& ctx, const std::vector<TypicalCellObservation>& obs) {
  std::vector<double> grid = ctx.cfg["H_grid"].get<std::vector<double>>();
  if (!grid.empty() || obs.empty()) return grid;
  std::vector<double> h;
  for (const auto& o : obs) h.push_back(o.h);
  std::sort(h.begin(), h.end());
  // Upper quantiles of kappa*h, so that every point carries data.
  for (double q : {0.1, 0.25, 0.4, 0.55, 0.7, 0.85, 0.95, 0.99}) {
    const double level = ctx.p.kappa == 1 ? q : 1 - q;
    grid.push_back(h[static_cast<std::size_t>(level * (h.size() - 1))]);
  }
  return grid;
}

Outcome do_height_tail(Context& ctx, Outputs& out) {
  const ObservationSet set = observations(ctx, out);
  const std::vector<double> grid = height_grid(ctx, set.obs);
  if (grid.empty()) throw Error(ErrorCode::InsufficientSample, "no heights for the height tail");
  const int need = static_cast<int>(std::ceil(0.875 * grid.size()));
  json seeds = json::array();
  std::vector<double> within;
  std::ofstream csv(out.path("height_tail.csv"), std::ios::binary);
  csv << "seed,H,count,survival,ci_lo,ci_hi,lower_bound,upper_bound,within\n";
  long long rows = 0;
  for (const auto& [seed, obs] : by_seed(set.obs)) {
    std::vector<double> h;
    for (const auto& o : obs) h.push_back(o.h);
    const double vol = set.volume.count(seed) ? set.volume.at(seed) : 0;
    if (!(vol > 0)) config_error("height-tail with an input file needs a positive 'volume' per window");
    const HeightTailReport rep = typical_height_tail(h, vol, ctx.p, grid);
    for (const auto& row : rep.rows) {
      csv << seed << ',' << format_double(row.H) << ',' << row.count << ',' << format_double(row.survival) << ','
          << format_double(row.ci_lo) << ',' << format_double(row.ci_hi) << ',' << format_double(row.lower_bound)
          << ',' << format_double(row.upper_bound) << ',' << (row.within ? 1 : 0) << '\n';
      ++rows;
    }
    seeds.push_back({{"seed", seed}, {"vertices", h.size()}, {"lambda", rep.lambda}, {"lambda_lo", rep.lambda_lo},
                     {"lambda_hi", rep.lambda_hi}, {"within", rep.within_count}, {"pass", rep.within_count >= need}});
    within.push_back(rep.within_count);
  }
  csv.close();
  out.add("height_tail.csv", rows);
  Outcome r;
  r.gated = true;
  r.pass = median(within) >= need;
  json params = model_json(ctx.p);
  params["H_grid"] = grid;
  params["required_within"] = need;
  params["a"] = (ctx.p.kappa * ctx.p.beta + 1) / ctx.p.exponent();
  params["c"] = added_vertex_constant(ctx.p);
  r.report = {{"test", "height-tail"}, {"params", params}, {"statistic", median(within)},
              {"p_value", nullptr},    {"pass", r.pass},   {"seeds", seeds}};
  return r;
}

Outcome do_degree_tail(Context& ctx, Outputs& out) {
  const ObservationSet set = observations(ctx, out);
  std::vector<int> deg;
  for (const auto& o : set.obs) deg.push_back(o.n_facets);
  const DegreeTailReport rep =
      degree_tail_fit(deg, ctx.cfg["min_tail"].get<long long>(), ctx.cfg["min_sample"].get<long long>());
  std::ofstream csv(out.path("degree_tail.csv"), std::ios::binary);
  csv << "k,count,survival\n";
  for (std::size_t i = 0; i < rep.counts.size(); ++i)
    csv << rep.k_min + static_cast<int>(i) << ',' << rep.counts[i] << ',' << format_double(rep.survival[i]) << '\n';
  csv.close();
  out.add("degree_tail.csv", static_cast<long long>(rep.counts.size()));
  Outcome r;
  r.gated = true;
  // Super-exponential decay for the beta model, exponential for beta'.
  r.pass = ctx.p.kappa == 1 ? rep.a < -0.5 : (std::abs(rep.a) < 0.5 && rep.b < 0);
  json params = model_json(ctx.p);
  params["min_tail"] = ctx.cfg["min_tail"];
  r.report = {{"test", "degree-tail"}, {"params", params}, {"statistic", rep.a}, {"p_value", nullptr},
              {"pass", r.pass},        {"sample_size", rep.sample_size},
              {"a", rep.a},            {"b", rep.b},        {"c", rep.c},       {"se_a", rep.se_a},
              {"se_b", rep.se_b},      {"fit_lo", rep.fit_lo}, {"fit_hi", rep.fit_hi}};
  return r;
}

Outcome do_max_degree(Context& ctx, Outputs& out) {
  const std::vector<double> rho = ctx.cfg["rho"].get<std::vector<double>>();
  const int reps = ctx.cfg["reps"].get<int>();
  const MaxDegreeReport rep = max_degree_experiment(ctx.p, rho, reps, ctx.seeds.front(), ctx.dopt);
  std::ofstream csv(out.path("max_degree.csv"), std::ios::binary);
  csv << "rho,rep,max_degree\n";
  long long rows = 0;
  for (std::size_t k = 0; k < rep.rho.size(); ++k)
    for (std::size_t j = 0; j < rep.maxima[k].size(); ++j, ++rows)
      csv << format_double(rep.rho[k]) << ',' << j << ',' << rep.maxima[k][j] << '\n';
  csv.close();
  out.add("max_degree.csv", rows);
  Outcome r;
  // Soft: reported but never fails the run.
  const bool soft_pass = !rep.top_mass.empty() && rep.top_mass.back() >= 0.6;
  json params = model_json(ctx.p);
  params["rho"] = rep.rho;
  params["reps"] = reps;
  r.report = {{"test", "max-degree"},
              {"params", params},
              {"statistic", rep.top_mass.empty() ? 0.0 : rep.top_mass.back()},
              {"p_value", nullptr},
              {"pass", soft_pass},
              {"soft", true},
              {"top_mass", rep.top_mass},
              {"top_start", rep.top_start},
              {"expected_vertices", rep.expected_vertices},
              {"coverage", rep.coverage}};
  return r;
}

Outcome do_phi(Context& ctx, Outputs&) {
  const json& c = ctx.cfg["phi"];
  const std::vector<double> xv = c["x"].get<std::vector<double>>();
  if (static_cast<int>(xv.size()) != ctx.p.d) config_error("phi.x must have d coordinates");
  const WeightedPoint x{Eigen::Map<const Vector>(xv.data(), xv.size()), c["h"].get<double>()};
  std::vector<Vector> verts;
  for (const auto& w : c["vertices"]) {
    const std::vector<double> wv = w.get<std::vector<double>>();
    if (static_cast<int>(wv.size()) != ctx.p.d) config_error("phi.vertices entries must have d coordinates");
    verts.push_back(Eigen::Map<const Vector>(wv.data(), wv.size()));
  }
  if (verts.empty()) config_error("phi needs at least one vertex");
  const std::string method = c["method"].get<std::string>();
  PhiResult res;
  if (method == "quadrature") {
    if (ctx.p.d != 2) config_error("phi by quadrature from vertices is available at d = 2");
    res = phi_content_vertices(DensityTable(ctx.p), x, verts);
  } else if (method == "mc") {
    double R = 0;
    for (const auto& w : verts) R = std::max(R, (w - x.v).norm());
    auto support = [&](const Vector& u) {
      double s = -std::numeric_limits<double>::infinity();
      for (const auto& w : verts) s = std::max(s, (w - x.v).dot(u));
      return s;
    };
    Rng rng(c["seed"].get<std::uint64_t>(), 0, 0x9f);
    res = phi_content_mc(ctx.p, x, support, R, rng, c["samples"].get<long long>());
  } else {
    config_error("phi.method must be 'quadrature' or 'mc'");
  }
  Outcome r;
  r.report = {{"test", "phi"},          {"params", model_json(ctx.p)},   {"value", res.value},
              {"method", to_string(res.method)}, {"std_error", res.std_error}, {"samples", res.samples}};
  return r;
}

}  // namespace

json default_config() {
  return {
      {"experiment", "typical-cells"},
      {"model", {{"kappa", 1}, {"beta", 0.0}, {"gamma", 1.0}, {"d", 2}}},
      {"domain",
       {{"box", 10.0},
        {"padding", -1.0},
        {"hmax", -1.0},
        {"eps", -1.0},
        {"far_depth", -1.0},
        {"far_padding", -1.0},
        {"risk_budget", 1e-3},
        {"leak_budget", 1e-4}}},
      {"tessellation", {{"max_refinements", 6}, {"max_points", 3e6}}},
      {"seeds", {1}},
      {"replicates", 1},
      {"output_dir", "tess_out"},
      {"check", false},
      {"input", ""},
      {"volume", 0.0},
      {"n", 6},
      {"alpha", 0.01},
      {"descriptor", "circum_norm"},
      {"permutations", 10000},
      {"H_grid", json::array()},
      {"min_tail", 10},
      {"min_sample", 10000},
      {"rho", {100.0, 1000.0}},
      {"reps", 10},
      {"phi",
       {{"x", {0.0, 0.0}},
        {"h", 1.0},
        {"vertices", json::array()},
        {"method", "quadrature"},
        {"samples", 100000},
        {"seed", 1}}},
  };
}

json resolve_config(const json& user) {
  json cfg = default_config();
  merge_checked(cfg, user, "");
  const std::string exp = cfg["experiment"].get<std::string>();
  if (std::find(kExperiments.begin(), kExperiments.end(), exp) == kExperiments.end())
    config_error("unknown experiment '" + exp + "'");
  for (const auto& s : cfg["seeds"])
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0))
      config_error("seeds must be non-negative integers");
  if (cfg["seeds"].empty()) config_error("at least one seed is needed");
  if (cfg["replicates"].get<int>() < 1) config_error("replicates must be at least 1");
  if (!(cfg["domain"]["box"].get<double>() > 0)) config_error("domain.box must be positive");
  for (const auto& w : cfg["phi"]["vertices"])
    if (!w.is_array()) config_error("phi.vertices must be a list of coordinate lists");
  model_of(cfg).validate();
  return cfg;
}

void apply_override(json& cfg, const std::string& key, const std::string& value) {
  const json defaults = default_config();
  const json::json_pointer ptr = pointer_for(key);
  if (!defaults.contains(ptr)) config_error("unknown option --" + key);
  const json& def = defaults[ptr];
  json v;
  if (def.is_string()) {
    v = value;
  } else {
    try {
      v = json::parse(value);
    } catch (const json::exception&) {
      try {
        v = json::parse("[" + value + "]");
      } catch (const json::exception&) {
        config_error("cannot parse value '" + value + "' for --" + key);
      }
    }
    if (def.is_array() && !v.is_array()) v = json::array({v});
  }
  cfg[ptr] = v;
}

Outcome run(const json& user_cfg) {
  Context ctx;
  ctx.cfg = resolve_config(user_cfg);
  ctx.p = model_of(ctx.cfg);
  ctx.dopt = domain_options_of(ctx.cfg);
  ctx.topt = tessellation_options_of(ctx.cfg);
  ctx.dom = make_domain(ctx.p, ctx.dopt);
  for (const auto& s : ctx.cfg["seeds"]) ctx.seeds.push_back(s.get<std::uint64_t>());
  ctx.replicates = ctx.cfg["replicates"].get<int>();
  ctx.workers = worker_count();

  const fs::path dir = ctx.cfg["output_dir"].get<std::string>();
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw Error(ErrorCode::IoError, "cannot create " + dir.string());
  Outputs out(dir);

  const std::string exp = ctx.cfg["experiment"].get<std::string>();
  Outcome r;
  if (exp == "sample") r = do_sample(ctx, out);
  else if (exp == "tessellate") r = do_tessellate(ctx, out);
  else if (exp == "typical-cells") r = do_typical_cells(ctx, out);
  else if (exp == "gamma-test") r = do_gamma_test(ctx, out);
  else if (exp == "independence") r = do_independence(ctx, out);
  else if (exp == "height-tail") r = do_height_tail(ctx, out);
  else if (exp == "degree-tail") r = do_degree_tail(ctx, out);
  else if (exp == "max-degree") r = do_max_degree(ctx, out);
  else r = do_phi(ctx, out);

  if (!r.report.is_null()) {
    std::string name = exp + ".json";
    std::replace(name.begin(), name.end(), '-', '_');
    out.write_json(name, r.report);
  }

  json manifest = {{"tool", "tess"},
                   {"version", kVersion},
                   {"config", ctx.cfg},
                   {"constants", constants_json(ctx.p, ctx.cfg["n"].get<int>())},
                   {"domain", domain_json(ctx.dom)},
                   {"tail_risk", tail_risk(ctx.p, ctx.dom)},
                   {"runs", ctx.runs},
                   {"outputs", out.list()},
                   {"fingerprint", out.fingerprint()}};
  if (r.gated) manifest["gate"] = {{"experiment", exp}, {"pass", r.pass}};
  std::ofstream mf(out.path("manifest.json"), std::ios::binary);
  if (!mf) throw Error(ErrorCode::IoError, "cannot write " + out.path("manifest.json"));
  mf << manifest.dump(2) << '\n';
  return r;
}

bool replay(const std::string& manifest_path, const std::string& out_dir, json* comparison) {
  std::ifstream in(manifest_path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read " + manifest_path);
  json m;
  try {
    m = json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::IoError, std::string("manifest is not valid JSON: ") + e.what());
  }
  if (!m.contains("version") || !m.contains("config") || !m.contains("outputs"))
    throw Error(ErrorCode::IoError, "manifest lacks version, config or outputs");
  const std::string ver = m["version"].get<std::string>();
  const std::string ours = kVersion;
  if (ver.substr(0, ver.find('.')) != ours.substr(0, ours.find('.')))
    throw Error(ErrorCode::VersionMismatch, "manifest version " + ver + " differs in major from " + ours);
  json cfg = m["config"];
  cfg["output_dir"] = out_dir.empty() ? fs::path(manifest_path).parent_path().string() : out_dir;
  if (cfg["output_dir"].get<std::string>().empty()) cfg["output_dir"] = ".";
  run(cfg);

  std::map<std::string, std::string> expected;
  for (const auto& e : m["outputs"]) expected[e["file"]] = e["fnv1a64"];
  bool same = true;
  json cmp = json::array();
  for (const auto& [file, hash] : expected) {
    const fs::path p = fs::path(cfg["output_dir"].get<std::string>()) / file;
    const std::string got = fs::exists(p) ? fnv1a_file(p.string()) : "";
    cmp.push_back({{"file", file}, {"expected", hash}, {"actual", got}, {"identical", got == hash}});
    same = same && got == hash;
  }
  if (comparison) *comparison = cmp;
  return same;
}

namespace {

int exit_for(const Error& e) {
  switch (e.code()) {
    case ErrorCode::ConfigError:
    case ErrorCode::InadmissibleParams:
    case ErrorCode::IoError:
    case ErrorCode::VersionMismatch:
      return kConfig;
    default:
      return kNumerical;
  }
}

// Turns the leftover "--key value" and "--key=value" tokens into overrides.
void apply_extras(json& cfg, const std::vector<std::string>& extras) {
  for (std::size_t i = 0; i < extras.size(); ++i) {
    const std::string& tok = extras[i];
    if (tok.rfind("--", 0) != 0) config_error("unexpected argument '" + tok + "'");
    std::string key = tok.substr(2), value;
    if (auto eq = key.find('='); eq != std::string::npos) {
      value = key.substr(eq + 1);
      key = key.substr(0, eq);
    } else if (i + 1 < extras.size() && extras[i + 1].rfind("--", 0) != 0) {
      value = extras[++i];
    } else {
      value = "true";
    }
    apply_override(cfg, key, value);
  }
}

json load_config(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read config " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    config_error(std::string("config is not valid JSON: ") + e.what());
  }
}

void print_outcome(const std::string& exp, const Outcome& r, const json& cfg) {
  std::cout << exp << ": wrote " << cfg["output_dir"].get<std::string>() << "/manifest.json";
  if (r.gated) std::cout << "; gate " << (r.pass ? "pass" : "FAIL");
  if (r.report.contains("statistic") && !r.report["statistic"].is_null())
    std::cout << "; statistic " << r.report["statistic"].dump();
  if (r.report.contains("p_value") && !r.report["p_value"].is_null())
    std::cout << "; p " << r.report["p_value"].dump();
  if (r.report.contains("value")) std::cout << "; value " << r.report["value"].dump();
  std::cout << '\n';
}

}  // namespace

int main_cli(int argc, char** argv) {
  CLI::App app{"Beta-Delaunay and Laguerre tessellations: sampling, certified cells and verification tests"};
  app.require_subcommand(1);
  std::string config_path, manifest_path, out_dir;
  bool check = false;
  std::vector<std::pair<std::string, CLI::App*>> subs;
  for (const std::string name : {"run", "sample", "tessellate", "typical-cells", "gamma-test", "independence",
                                 "height-tail", "degree-tail", "max-degree", "phi"}) {
    CLI::App* s = app.add_subcommand(name, name == "run" ? "Run the experiment named in the config" : "Run " + name);
    s->add_option("--config", config_path, "JSON config file");
    s->add_flag("--check", check, "Exit 3 when the experiment's gate fails");
    s->allow_extras();
    subs.emplace_back(name, s);
  }
  CLI::App* rp = app.add_subcommand("replay", "Re-run a manifest and compare output hashes");
  rp->add_option("manifest", manifest_path, "manifest.json of an earlier run")->required();
  rp->add_option("--out", out_dir, "Output directory (default: the manifest's directory)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kConfig;
  }

  try {
    if (rp->parsed()) {
      json cmp;
      const bool same = replay(manifest_path, out_dir, &cmp);
      for (const auto& e : cmp)
        std::cout << e["file"].get<std::string>() << (e["identical"].get<bool>() ? " identical" : " DIFFERS") << '\n';
      std::cout << "replay: " << (same ? "identical" : "outputs differ") << '\n';
      return same ? kOk : kNumerical;
    }
    for (const auto& [name, s] : subs) {
      if (!s->parsed()) continue;
      json cfg = load_config(config_path);
      apply_extras(cfg, s->remaining());
      if (name != "run") cfg["experiment"] = name;
      if (check) cfg["check"] = true;
      const json resolved = resolve_config(cfg);
      const Outcome r = run(resolved);
      const std::string exp = resolved["experiment"].get<std::string>();
      print_outcome(exp, r, resolved);
      if (resolved["check"].get<bool>() && r.gated && !r.pass) return kGate;
      return kOk;
    }
  } catch (const Error& e) {
    std::cerr << "tess: " << e.what() << '\n';
    return exit_for(e);
  } catch (const json::exception& e) {
    std::cerr << "tess: configuration error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "tess: " << e.what() << '\n';
    return kNumerical;
  }
  return kOk;
}

}  // namespace tess
