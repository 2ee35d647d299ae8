#include "mcm/bench.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

#include "mcm/rng.hpp"
#include "mcm/verification.hpp"

namespace mcm::bench {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void field_error(const std::string& pointer, const std::string& what) {
  throw InvalidSpec("field " + pointer + ": " + what);
}

std::pair<long, long> line_col(const std::string& text, std::size_t byte) {
  long line = 1;
  long col = 1;
  for (std::size_t i = 0; i < byte && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

template <class T>
std::vector<T> scalar_or_list(const json& j, const std::string& pointer) {
  auto one = [&](const json& v, const std::string& where) -> T {
    if constexpr (std::is_same_v<T, double>) {
      if (!v.is_number()) field_error(where, "expected a number");
      return v.get<double>();
    } else {
      if (!v.is_number_integer() || v.get<long long>() < 0)
        field_error(where, "expected a non-negative integer");
      return v.get<T>();
    }
  };
  std::vector<T> out;
  if (j.is_array()) {
    if (j.empty()) field_error(pointer, "list must not be empty");
    for (std::size_t i = 0; i < j.size(); ++i) out.push_back(one(j[i], pointer + "/" + std::to_string(i)));
  } else {
    out.push_back(one(j, pointer));
  }
  return out;
}

std::uint64_t derived_seed(std::uint64_t master, std::size_t entry, std::size_t point, long rep) {
  std::uint64_t s = master ^ (static_cast<std::uint64_t>(entry) << 40) ^
                    (static_cast<std::uint64_t>(point) << 20) ^ static_cast<std::uint64_t>(rep);
  return splitmix64(s) & 0xffffffffULL;
}

bool same_meta(const InstanceMeta& a, const InstanceMeta& b) { return to_json(a) == to_json(b); }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error("cannot open " + path.string() + " for writing");
  os << text;
  if (!os) throw Error("failed writing " + path.string());
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream is(line);
  while (std::getline(is, cur, ',')) out.push_back(cur);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

double parse_double(const std::string& s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    throw Error("results: cannot parse number '" + s + "'");
  }
  return v;
}

// Wraps a model and perturbs its gradient; used to prove the verify battery notices.
class FaultyGradient final : public ObjectiveModel {
 public:
  explicit FaultyGradient(std::unique_ptr<ObjectiveModel> inner) : inner_(std::move(inner)) {}
  Index rows() const override { return inner_->rows(); }
  Index cols() const override { return inner_->cols(); }
  double value(const Mat& x) const override { return inner_->value(x); }
  Mat gradient(const Mat& x) const override {
    Mat g = inner_->gradient(x);
    g(0, 0) += 1e-3 * (1.0 + g.norm());
    return g;
  }
  double rho_bound() const override { return inner_->rho_bound(); }
  double scale() const override { return inner_->scale(); }
  std::optional<double> gradient_norm_bound() const override {
    return inner_->gradient_norm_bound();
  }

 private:
  std::unique_ptr<ObjectiveModel> inner_;
};

}  // namespace

std::string to_string(SolverName s) {
  switch (s) {
    case SolverName::GRP:
      return "grp";
    case SolverName::GPP:
      return "gpp";
    case SolverName::CBCDP:
      return "cbcdp";
    case SolverName::QRBase:
      return "qrbase";
  }
  return "unknown";
}

SolverName solver_from_string(const std::string& name) {
  if (name == "grp") return SolverName::GRP;
  if (name == "gpp") return SolverName::GPP;
  if (name == "cbcdp") return SolverName::CBCDP;
  if (name == "qrbase") return SolverName::QRBase;
  throw InvalidSpec("unknown solver '" + name + "' (expected grp, gpp, cbcdp or qrbase)");
}

CorrectionChoice parse_corrections(const std::string& text) {
  if (text == "delta") return {true, 0};
  if (text.rfind("fixed:", 0) == 0) {
    const std::string num = text.substr(6);
    long m = 0;
    const auto res = std::from_chars(num.data(), num.data() + num.size(), m);
    if (res.ec == std::errc() && res.ptr == num.data() + num.size() && m >= 1) return {false, m};
  }
  throw InvalidSpec("corrections must be 'delta' or 'fixed:N' with N >= 1, got '" + text + "'");
}

SolveConfig make_config(SolverName solver, const ObjectiveModel& model, Family family,
                        const RunOptions& opts) {
  StepKind kind = StepKind::GP;
  if (solver == SolverName::GRP) kind = StepKind::GR;
  if (solver == SolverName::CBCDP) kind = StepKind::CBCD;

  SolveConfig cfg = opts.gamma_mode == GammaMode::Practical
                        ? practical_config(kind, model, family)
                        : theory_config(kind, model, family);
  const CorrectionChoice corr = opts.corrections.value_or(
      CorrectionChoice{opts.gamma_mode == GammaMode::Practical, 1});
  cfg.correction.schedule = corr.delta ? CorrectionSchedule::growing()
                                       : CorrectionSchedule::fixed(corr.fixed);
  if (opts.max_iter) cfg.max_iter = *opts.max_iter;
  if (opts.eps_g) cfg.eps_g = *opts.eps_g;
  if (opts.eps_x) cfg.eps_x = *opts.eps_x;
  if (opts.eps_f) cfg.eps_f = *opts.eps_f;
  if (opts.window) cfg.window = *opts.window;
  if (solver == SolverName::QRBase) cfg.correct = false;
  return cfg;
}

SolveReport run_solver(SolverName solver, const ObjectiveModel& model, const StiefelPoint& x0,
                       const SolveConfig& cfg) {
  if (solver == SolverName::QRBase) return solve_qr_baseline(model, x0, cfg);
  return solve(model, x0, cfg);
}

ExperimentSpec parse_spec(const std::string& text, bool allow_large) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    const auto [line, col] = line_col(text, e.byte == 0 ? 0 : e.byte - 1);
    std::ostringstream os;
    os << "spec:" << line << ":" << col << ": JSON syntax error: " << e.what();
    throw InvalidSpec(os.str());
  }
  if (!j.is_object()) field_error("/", "spec must be a JSON object");

  static const std::set<std::string> known = {"master_seed", "repetitions", "solvers",
                                              "gamma_mode",  "corrections", "overrides",
                                              "grid"};
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) field_error("/" + key, "unknown key");
  }

  ExperimentSpec spec;
  if (j.contains("master_seed")) {
    if (!j["master_seed"].is_number_unsigned()) field_error("/master_seed", "expected an unsigned integer");
    spec.master_seed = j["master_seed"].get<std::uint64_t>();
  }
  if (j.contains("repetitions")) {
    if (!j["repetitions"].is_number_integer() || j["repetitions"].get<long>() < 1)
      field_error("/repetitions", "expected an integer >= 1");
    spec.repetitions = j["repetitions"].get<long>();
  }
  if (j.contains("solvers")) {
    const json& s = j["solvers"];
    if (!s.is_array() || s.empty()) field_error("/solvers", "expected a nonempty list of solver names");
    for (std::size_t i = 0; i < s.size(); ++i) {
      if (!s[i].is_string()) field_error("/solvers/" + std::to_string(i), "expected a string");
      try {
        spec.solvers.push_back(solver_from_string(s[i].get<std::string>()));
      } catch (const InvalidSpec& e) {
        field_error("/solvers/" + std::to_string(i), e.what());
      }
    }
  } else {
    spec.solvers = {SolverName::GRP, SolverName::GPP, SolverName::CBCDP, SolverName::QRBase};
  }
  if (j.contains("gamma_mode")) {
    const json& g = j["gamma_mode"];
    if (g == "practical") {
      spec.options.gamma_mode = GammaMode::Practical;
    } else if (g == "theory") {
      spec.options.gamma_mode = GammaMode::Theory;
    } else {
      field_error("/gamma_mode", "expected \"practical\" or \"theory\"");
    }
  }
  if (j.contains("corrections")) {
    if (!j["corrections"].is_string()) field_error("/corrections", "expected a string");
    try {
      spec.options.corrections = parse_corrections(j["corrections"].get<std::string>());
    } catch (const InvalidSpec& e) {
      field_error("/corrections", e.what());
    }
  }
  if (j.contains("overrides")) {
    const json& o = j["overrides"];
    if (!o.is_object()) field_error("/overrides", "expected an object");
    for (const auto& [key, value] : o.items()) {
      const std::string ptr = "/overrides/" + key;
      if (key == "max_iter" || key == "window") {
        if (!value.is_number_integer() || value.get<long>() < 1) field_error(ptr, "expected an integer >= 1");
        (key == "max_iter" ? spec.options.max_iter : spec.options.window) = value.get<long>();
      } else if (key == "eps_g" || key == "eps_x" || key == "eps_f") {
        if (!value.is_number() || !(value.get<double>() > 0.0)) field_error(ptr, "expected a positive number");
        auto& slot = key == "eps_g" ? spec.options.eps_g
                                    : (key == "eps_x" ? spec.options.eps_x : spec.options.eps_f);
        slot = value.get<double>();
      } else {
        field_error(ptr, "unknown override");
      }
    }
  }

  if (!j.contains("grid")) field_error("/grid", "missing");
  const json& grid = j["grid"];
  if (!grid.is_array() || grid.empty()) field_error("/grid", "expected a nonempty list of grid entries");

  std::map<std::string, InstanceMeta> by_name;
  static const std::set<std::string> entry_keys = {"family", "n",    "p",    "eta",  "zeta",
                                                   "alpha",  "beta", "seeds"};
  for (std::size_t e = 0; e < grid.size(); ++e) {
    const std::string base = "/grid/" + std::to_string(e);
    const json& g = grid[e];
    if (!g.is_object()) field_error(base, "expected an object");
    for (const auto& [key, value] : g.items())
      if (!entry_keys.count(key)) field_error(base + "/" + key, "unknown key");
    if (!g.contains("family") || !g["family"].is_string()) field_error(base + "/family", "expected a string");
    Family family;
    try {
      family = family_from_string(g["family"].get<std::string>());
    } catch (const Error& err) {
      field_error(base + "/family", err.what());
    }
    for (const char* req : {"n", "p"})
      if (!g.contains(req)) field_error(base + "/" + req, "missing");
    const auto ns = scalar_or_list<Index>(g["n"], base + "/n");
    const auto ps = scalar_or_list<Index>(g["p"], base + "/p");
    const GenParams dflt = default_params(family, 1, 1, 0);
    auto opt_list = [&](const char* key, double fallback) {
      return g.contains(key) ? scalar_or_list<double>(g[key], base + "/" + key)
                             : std::vector<double>{fallback};
    };
    const auto etas = opt_list("eta", dflt.eta);
    const auto zetas = opt_list("zeta", dflt.zeta);
    const auto alphas = opt_list("alpha", dflt.alpha);
    const auto betas = opt_list("beta", dflt.beta);
    std::optional<std::vector<std::uint64_t>> seeds;
    if (g.contains("seeds")) {
      if (!g["seeds"].is_array()) field_error(base + "/seeds", "expected a list of integers");
      seeds = scalar_or_list<std::uint64_t>(g["seeds"], base + "/seeds");
    }

    std::size_t point = 0;
    for (Index n : ns)
      for (Index p : ps)
        for (double eta : etas)
          for (double zeta : zetas)
            for (double alpha : alphas)
              for (double beta : betas) {
                std::vector<std::uint64_t> point_seeds;
                if (seeds) {
                  point_seeds = *seeds;
                } else {
                  for (long r = 0; r < spec.repetitions; ++r)
                    point_seeds.push_back(derived_seed(spec.master_seed, e, point, r));
                }
                ++point;
                for (std::uint64_t seed : point_seeds) {
                  InstanceMeta meta;
                  meta.family = family;
                  meta.params = GenParams{n, p, eta, zeta, alpha, beta, seed, allow_large};
                  try {
                    meta.params.validate(family);
                  } catch (const Error& err) {
                    field_error(base, err.what());
                  }
                  const std::string name = meta.file_stem();
                  auto it = by_name.find(name);
                  if (it == by_name.end()) {
                    by_name.emplace(name, meta);
                  } else if (!same_meta(it->second, meta)) {
                    field_error(base, "two grid points with different parameters share the instance name '" +
                                          name + "'; give them distinct seeds");
                  }
                }
              }
  }
  for (auto& [name, meta] : by_name) spec.instances.push_back(meta);
  return spec;
}

ExperimentSpec load_spec(const fs::path& path, bool allow_large) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw InvalidSpec("cannot read spec file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return parse_spec(ss.str(), allow_large);
}

std::vector<fs::path> cmd_gen(const ExperimentSpec& spec, const fs::path& out_dir) {
  fs::create_directories(out_dir);
  std::vector<fs::path> written;
  for (const InstanceMeta& meta : spec.instances) {
    const fs::path path = out_dir / (meta.file_stem() + ".json");
    write_text(path, to_json(meta).dump(2) + "\n");
    written.push_back(path);
  }
  return written;
}

InstanceMeta load_instance(const fs::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error("cannot read instance file " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::parse_error& e) {
    throw Error("instance " + path.string() + ": " + e.what());
  }
  return instance_from_json(j);
}

int exit_code(Status status) {
  if (is_converged(status)) return 0;
  if (status == Status::MaxIter) return 2;
  if (status == Status::StepFailed) return 3;
  return 1;
}

SolveOutput cmd_solve(const InstanceMeta& inst, SolverName solver, const RunOptions& opts,
                      std::uint64_t master_seed, const fs::path& out_dir) {
  const auto model = generate(inst.family, inst.params);
  const StiefelPoint x0 = initial_point(inst.params.n, inst.params.p, inst.params.seed, master_seed);
  const SolveConfig cfg = make_config(solver, *model, inst.family, opts);
  SolveReport report = run_solver(solver, *model, x0, cfg);

  fs::create_directories(out_dir);
  const std::string stem = inst.file_stem() + "_" + to_string(solver);
  const fs::path trace_path = out_dir / (stem + "_trace.csv");
  const fs::path summary_path = out_dir / (stem + ".json");

  std::ostringstream trace;
  write_trace_csv(trace, report);
  write_text(trace_path, trace.str());

  const IterRecord* last = report.trace.empty() ? nullptr : &report.trace.back();
  json summary = {{"instance", inst.file_stem()},
                  {"solver", to_string(solver)},
                  {"gamma_mode", opts.gamma_mode == GammaMode::Practical ? "practical" : "theory"},
                  {"master_seed", master_seed},
                  {"status", to_string(report.status)},
                  {"iters", report.iters},
                  {"f0", report.f0},
                  {"f", report.final_f()},
                  {"kkt0", report.kkt0},
                  {"kkt", last ? last->kkt : report.kkt0},
                  {"substat", last ? last->substat : report.substat0},
                  {"sym", last ? last->sym : report.sym0},
                  {"feasibility", last ? last->feas : report.feas0},
                  {"gamma", cfg.correct ? report.gamma : 0.0},
                  {"rho", report.rho},
                  {"wall_s", last ? last->wall_s : 0.0},
                  {"lemma_violations", report.lemma_violations.size()},
                  {"message", report.message},
                  {"instance_meta", to_json(inst)}};
  write_text(summary_path, summary.dump(2) + "\n");
  return {std::move(report), summary_path, trace_path};
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

void finalize_rows(std::vector<ResultRow>& rows) {
  std::map<std::string, double> f_min;
  for (const ResultRow& r : rows) {
    if (!std::isfinite(r.f)) continue;
    auto it = f_min.find(r.instance);
    if (it == f_min.end()) {
      f_min.emplace(r.instance, r.f);
    } else {
      it->second = std::min(it->second, r.f);
    }
  }
  for (ResultRow& r : rows) {
    auto it = f_min.find(r.instance);
    r.f_min = it == f_min.end() ? std::nan("") : it->second;
    r.fval_variance = std::abs(r.f - r.f_min) / (1.0 + std::abs(r.f_min)) + kMachineEps;
  }
}

std::vector<ResultRow> run_bench(const ExperimentSpec& spec, unsigned workers) {
  struct Job {
    const InstanceMeta* inst;
    SolverName solver;
  };
  std::vector<Job> jobs;
  for (const InstanceMeta& inst : spec.instances)
    for (SolverName s : spec.solvers) jobs.push_back({&inst, s});

  std::vector<ResultRow> rows(jobs.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      const InstanceMeta& inst = *jobs[i].inst;
      ResultRow& row = rows[i];
      row.instance = inst.file_stem();
      row.family = inst.family;
      row.n = inst.params.n;
      row.p = inst.params.p;
      row.seed = inst.params.seed;
      row.solver = to_string(jobs[i].solver);
      try {
        const auto model = generate(inst.family, inst.params);
        const StiefelPoint x0 =
            initial_point(inst.params.n, inst.params.p, inst.params.seed, spec.master_seed);
        const SolveConfig cfg = make_config(jobs[i].solver, *model, inst.family, spec.options);
        SolveReport rep = run_solver(jobs[i].solver, *model, x0, cfg);
        rep.trace.shrink_to_fit();
        const IterRecord* last = rep.trace.empty() ? nullptr : &rep.trace.back();
        row.status = to_string(rep.status);
        row.failed = !is_converged(rep.status);
        row.iters = rep.iters;
        row.f = rep.final_f();
        row.kkt = last ? last->kkt : rep.kkt0;
        row.kkt_rel = rep.kkt0 > 0.0 ? row.kkt / rep.kkt0 : 0.0;
        row.feasibility = last ? last->feas : rep.feas0;
        row.wall_s = last ? last->wall_s : 0.0;
      } catch (const std::exception& e) {
        row.status = "Error";
        row.failed = true;
        row.f = std::nan("");
        row.kkt = row.kkt_rel = row.feasibility = std::nan("");
      }
    }
  };
  workers = std::max(1u, std::min<unsigned>(workers, static_cast<unsigned>(jobs.size())));
  std::vector<std::thread> pool;
  for (unsigned w = 1; w < workers; ++w) pool.emplace_back(worker);
  worker();
  for (auto& t : pool) t.join();

  std::stable_sort(rows.begin(), rows.end(), [](const ResultRow& a, const ResultRow& b) {
    return std::tie(a.instance, a.solver) < std::tie(b.instance, b.solver);
  });
  finalize_rows(rows);
  return rows;
}

void write_results_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  std::map<std::string, double> check;
  for (const ResultRow& r : rows) {
    if (!std::isfinite(r.f)) continue;
    auto [it, fresh] = check.emplace(r.instance, r.f);
    if (!fresh) it->second = std::min(it->second, r.f);
  }
  os << kResultsHeader << '\n';
  for (const ResultRow& r : rows) {
    auto it = check.find(r.instance);
    if (it != check.end() && r.f_min != it->second)
      throw Error("results: f_min for " + r.instance + " is not the minimum over its solvers");
    os << r.instance << ',' << to_string(r.family) << ',' << r.n << ',' << r.p << ',' << r.seed << ','
       << r.solver << ',' << r.status << ',' << (r.failed ? 1 : 0) << ',' << r.iters << ','
       << format_double(r.f) << ',' << format_double(r.f_min) << ','
       << format_double(r.fval_variance) << ',' << format_double(r.kkt) << ','
       << format_double(r.kkt_rel) << ',' << format_double(r.feasibility) << ','
       << format_double(r.wall_s) << '\n';
  }
}

std::vector<ResultRow> read_results_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error("results: empty file");
  const auto header = split_csv(line);
  std::map<std::string, std::size_t> col;
  for (std::size_t i = 0; i < header.size(); ++i) col[header[i]] = i;
  for (const char* need : {"instance", "solver", "failed", "f", "wall_s"})
    if (!col.count(need)) throw Error(std::string("results: missing column '") + need + "'");

  std::vector<ResultRow> rows;
  long lineno = 1;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto cells = split_csv(line);
    if (cells.size() != header.size())
      throw Error("results: line " + std::to_string(lineno) + " has " + std::to_string(cells.size()) +
                  " cells, header has " + std::to_string(header.size()));
    auto cell = [&](const char* name) -> const std::string& { return cells[col.at(name)]; };
    auto num = [&](const char* name, double fallback) {
      return col.count(name) ? parse_double(cells[col.at(name)]) : fallback;
    };
    ResultRow r;
    r.instance = cell("instance");
    r.solver = cell("solver");
    r.failed = cell("failed") == "1";
    if (col.count("status")) r.status = cell("status");
    if (col.count("family")) r.family = family_from_string(cell("family"));
    r.n = static_cast<Index>(num("n", 0));
    r.p = static_cast<Index>(num("p", 0));
    if (col.count("seed")) r.seed = std::stoull(cell("seed"));
    r.iters = static_cast<long>(num("iters", 0));
    r.f = num("f", 0);
    r.f_min = num("f_min", std::nan(""));
    r.fval_variance = num("fval_variance", std::nan(""));
    r.kkt = num("kkt", std::nan(""));
    r.kkt_rel = num("kkt_rel", std::nan(""));
    r.feasibility = num("feasibility", std::nan(""));
    r.wall_s = num("wall_s", 0);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_summary_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
  struct Acc {
    long count = 0;
    long failures = 0;
    double time = 0.0;
    double fvar = 0.0;
    double kkt = 0.0;
    double feas = 0.0;
  };
  std::vector<std::string> order;
  std::map<std::string, Acc> acc;
  for (const ResultRow& r : rows) {
    if (!acc.count(r.solver)) order.push_back(r.solver);
    Acc& a = acc[r.solver];
    ++a.count;
    if (r.failed) ++a.failures;
    a.time += r.wall_s;
    a.fvar += r.fval_variance;
    a.kkt += r.kkt;
    a.feas += r.feasibility;
  }
  os << "solver,runs,failures,mean_wall_s,mean_fval_variance,mean_kkt,mean_feasibility\n";
  for (const std::string& s : order) {
    const Acc& a = acc[s];
    const double c = static_cast<double>(a.count);
    os << s << ',' << a.count << ',' << a.failures << ',' << format_double(a.time / c) << ','
       << format_double(a.fvar / c) << ',' << format_double(a.kkt / c) << ','
       << format_double(a.feas / c) << '\n';
  }
}

ProfileTable compute_profile(const std::vector<ResultRow>& rows, double omega_max,
                             int grid_points) {
  if (!(omega_max >= 1.0)) throw Error("profile: omega_max must be >= 1");
  if (grid_points < 2) throw Error("profile: need at least 2 grid points");
  ProfileTable t;
  std::map<std::string, std::size_t> pidx;
  std::map<std::string, std::size_t> sidx;
  for (const ResultRow& r : rows) {
    if (!pidx.count(r.instance)) {
      pidx[r.instance] = t.problems.size();
      t.problems.push_back(r.instance);
    }
    if (!sidx.count(r.solver)) {
      sidx[r.solver] = t.solvers.size();
      t.solvers.push_back(r.solver);
    }
  }
  if (t.solvers.size() < 2) throw SingleSolver("profile: need results from at least two solvers");

  const std::size_t np = t.problems.size();
  const std::size_t ns = t.solvers.size();
  std::vector<std::vector<double>> time(np, std::vector<double>(ns, -1.0));
  for (const ResultRow& r : rows) {
    if (r.failed) continue;
    time[pidx[r.instance]][sidx[r.solver]] = std::max(r.wall_s, 1e-12);
  }
  t.ratio.assign(np, std::vector<double>(ns, kFailRatio));
  for (std::size_t m = 0; m < np; ++m) {
    double best = std::numeric_limits<double>::infinity();
    for (double v : time[m])
      if (v > 0.0) best = std::min(best, v);
    if (!std::isfinite(best)) continue;
    for (std::size_t s = 0; s < ns; ++s)
      if (time[m][s] > 0.0) t.ratio[m][s] = time[m][s] / best;
  }

  const double log_max = std::log(omega_max);
  for (int i = 0; i < grid_points; ++i) {
    const double w = i == grid_points - 1 ? omega_max
                                          : std::exp(log_max * i / static_cast<double>(grid_points - 1));
    t.omega.push_back(w);
  }
  t.pi.assign(ns, std::vector<double>(t.omega.size(), 0.0));
  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t i = 0; i < t.omega.size(); ++i) {
      std::size_t hit = 0;
      // a failure carries the fail ratio but is never counted as solved,
      // even when omega_max reaches it
      for (std::size_t m = 0; m < np; ++m)
        if (time[m][s] > 0.0 && t.ratio[m][s] <= t.omega[i]) ++hit;
      t.pi[s][i] = static_cast<double>(hit) / static_cast<double>(np);
    }
  return t;
}

void write_profile_csv(std::ostream& os, const ProfileTable& table) {
  os << "omega";
  for (const std::string& s : table.solvers) os << ',' << s;
  os << '\n';
  for (std::size_t i = 0; i < table.omega.size(); ++i) {
    os << format_double(table.omega[i]);
    for (std::size_t s = 0; s < table.solvers.size(); ++s) os << ',' << format_double(table.pi[s][i]);
    os << '\n';
  }
}

std::vector<CheckOutcome> cmd_verify(const VerifyOptions& opts) {
  std::vector<CheckOutcome> out;
  auto record = [&](std::string name, bool ok, std::string detail) {
    out.push_back({std::move(name), ok, std::move(detail)});
  };
  auto model_for = [&](Family fam, const GenParams& gp) -> std::unique_ptr<ObjectiveModel> {
    auto m = generate(fam, gp);
    if (opts.inject_gradient_fault) return std::make_unique<FaultyGradient>(std::move(m));
    return m;
  };
  Rng rng(opts.seed);

  {  // kkt split identity
    double worst = 0.0;
    const int samples = opts.quick ? 200 : 1000;
    for (int s = 0; s < samples; ++s) {
      const Index n = 2 + static_cast<Index>(rng.uniform() * 48);
      const Index p = 1 + static_cast<Index>(rng.uniform() * static_cast<double>(n));
      const StiefelPoint x = orthonormalize_qr(rng.gaussian_matrix(n, std::min(p, n)));
      const Mat g = rng.gaussian_matrix(n, x.p());
      const double c2 = residual_c(x, g).squaredNorm();
      const double a = substationarity(x, g);
      const double b = symmetry_violation(x, g);
      worst = std::max(worst, std::abs(c2 - (a * a + b * b)) / c2);
    }
    std::ostringstream d;
    d << "max relative gap " << worst;
    record("kkt_split", worst <= 1e-10, d.str());
  }

  {  // gradient vs central differences
    double worst = 0.0;
    for (Family fam : {Family::Quadratic, Family::Brockett}) {
      for (int s = 0; s < 5; ++s) {
        const auto model = model_for(fam, default_params(fam, 12, 3, 100 + s));
        const Mat x = orthonormalize_qr(rng.gaussian_matrix(12, 3)).value();
        const Mat g = model->gradient(x);
        worst = std::max(worst, (g - fd_gradient(*model, x)).norm() / std::max(1.0, g.norm()));
      }
    }
    std::ostringstream d;
    d << "max relative error " << worst;
    record("fd_gradient", worst <= 1e-6, d.str());
  }

  {  // rotation optimality of the correction
    double worst = 0.0;
    for (Index p : {2, 3, 5}) {
      const StiefelPoint xb = orthonormalize_qr(rng.gaussian_matrix(p + 4, p));
      const Mat g = rng.gaussian_matrix(p + 4, p);
      for (int s = 0; s < (opts.quick ? 100 : 1000); ++s) {
        const Mat q = orthonormalize_qr(rng.gaussian_matrix(p, p)).value();
        worst = std::min(worst, rotation_optimality_gap(xb, g, 0.7, q));
      }
    }
    std::ostringstream d;
    d << "smallest gap " << worst;
    record("correction_optimality", worst >= -1e-12, d.str());
  }

  {  // correction count schedule
    const bool ok = delta_schedule(1) == 1 && delta_schedule(4) == 1 && delta_schedule(5) == 3 &&
                    delta_schedule(17) == 5;
    record("delta_schedule", ok, "k = 1, 4, 5, 17");
  }

  const Index n_eig = opts.quick ? 60 : 200;
  {  // eigenvalue oracle with N = 0
    double worst = 0.0;
    bool all_converged = true;
    for (std::uint64_t seed = 1; seed <= (opts.quick ? 2u : 5u); ++seed) {
      const QuadraticProblem base = gen_problem1(default_params(Family::Quadratic, n_eig, 10, seed));
      std::unique_ptr<ObjectiveModel> model =
          std::make_unique<QuadraticProblem>(base.m(), Mat::Zero(n_eig, 10));
      if (opts.inject_gradient_fault) model = std::make_unique<FaultyGradient>(std::move(model));
      const double lb = eigen_oracle_quadratic(base.m(), 10).f_lb;
      SolveConfig cfg = practical_config(StepKind::GP, *model, Family::Quadratic);
      cfg.correction.schedule = CorrectionSchedule::growing();
      const SolveReport rep = solve(*model, initial_point(n_eig, 10, seed, opts.seed), cfg);
      all_converged = all_converged && is_converged(rep.status);
      worst = std::max(worst, std::abs(rep.final_f() - lb) / std::abs(lb));
    }
    std::ostringstream d;
    d << "max relative gap to the eigenvalue bound " << worst;
    record("eigen_oracle", all_converged && worst <= 1e-6, d.str());
  }

  {  // lemma audit in the theory regime
    std::size_t violations = 0;
    std::size_t runs = 0;
    bool feasible = true;
    for (Family fam : {Family::Quadratic, Family::Brockett}) {
      for (std::uint64_t seed = 1; seed <= (opts.quick ? 3u : 10u); ++seed) {
        const Index n = opts.quick ? 30 : 60;
        const auto model = model_for(fam, default_params(fam, n, 5, seed));
        SolveConfig cfg = theory_config(StepKind::GP, *model, fam);
        cfg.max_iter = 300;
        const SolveReport rep = solve(*model, initial_point(n, 5, seed, opts.seed), cfg);
        violations += audit_lemmas(rep, *model).size();
        for (const IterRecord& r : rep.trace) feasible = feasible && r.feas <= kFeasTol;
        ++runs;
      }
    }
    std::ostringstream d;
    d << violations << " violations over " << runs << " runs";
    record("lemma_audit", violations == 0 && feasible, d.str());
  }
  return out;
}

}  // namespace mcm::bench
