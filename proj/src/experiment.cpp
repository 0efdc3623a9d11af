#include "tubal/experiment.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>
#include <tuple>

#include "json.hpp"

#include "tubal/completion.hpp"
#include "tubal/csv.hpp"
#include "tubal/earlystop.hpp"
#include "tubal/error.hpp"
#include "tubal/io.hpp"

namespace tubal::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

void require_known_keys(const Config& c) {
  c.require_known({
    "n",     "k",        "r",      "R",       "R_factor", "m",     "m_factor", "m_rule",
    "eta",   "T",        "alpha",  "init",    "sigma",    "noise", "seed",     "val_frac",
    "diag_stride", "repeats", "traces", "task", "input", "n1", "n2", "p",
    "trials", "operator"});
}

void parallel_for(std::size_t count, int workers, const std::function<void(std::size_t)>& fn) {
  const auto n_threads = static_cast<std::size_t>(std::max(1, workers));
  if (n_threads == 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < std::min(n_threads, count); ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < count; i = next++) fn(i);
    });
}

std::string clean_status(std::string s) {
  for (char& c : s)
    if (c == ',' || c == '\n' || c == '\r') c = ';';
  return s;
}

std::string num(double v) { return csv_number(v); }

double median(std::vector<double> v) {
  if (v.empty()) return fgd::kMissing;
  std::sort(v.begin(), v.end());
  const std::size_t h = v.size() / 2;
  return v.size() % 2 ? v[h] : 0.5 * (v[h - 1] + v[h]);
}

double mean(const std::vector<double>& v) {
  if (v.empty()) return fgd::kMissing;
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

template <class T, class F>
std::vector<T> parse_list(const Config& c, std::string_view key, std::vector<T> fallback, F parse) {
  if (!c.has(key)) return fallback;
  std::vector<T> out;
  for (const auto& s : c.strings(key)) out.push_back(parse(s));
  return out;
}

void require_nonempty_positive(const std::vector<Index>& v, const char* key) {
  for (Index x : v)
    if (x < 1) raise(ErrorCode::config, std::string(key) + " must be at least 1");
}

Seed instance_seed(Seed master, Index n, Index k, Index r, Index m, Index repeat) {
  return derive_seed(master, Stream::grid, n, k, r, m, repeat);
}

Seed noise_seed(Seed instance, NoiseSpec::Kind kind) {
  return derive_seed(instance, Stream::noise, static_cast<int>(kind));
}

void log_line(std::ostream* log, std::mutex& mu, const std::string& s) {
  if (!log) return;
  std::lock_guard lock(mu);
  *log << s << '\n' << std::flush;
}

}  // namespace

MRule parse_m_rule(std::string_view name) {
  if (name == "nrk") return MRule::nrk;
  if (name == "2cm") return MRule::two_cm;
  if (name == "kr2n") return MRule::kr2n;
  raise(ErrorCode::config, "unknown m_rule '" + std::string(name) + "' (nrk, 2cm, kr2n)");
}

Index measurement_count(MRule rule, double factor, Index n, Index r, Index k) {
  if (!(factor > 0.0)) raise(ErrorCode::config, "m_factor must be positive");
  double m = 0.0;
  switch (rule) {
    case MRule::nrk: m = factor * static_cast<double>(n * r * k); break;
    case MRule::two_cm: m = 2.0 * factor * static_cast<double>(n * r * k); break;
    case MRule::kr2n: m = factor * static_cast<double>(k * r * (2 * n - r)); break;
  }
  return std::max<Index>(1, static_cast<Index>(std::llround(m)));
}

NoiseSpec noise_at(NoiseSpec::Kind kind, double sigma, Seed seed) {
  if (sigma < 0.0) raise(ErrorCode::config, "sigma must be nonnegative");
  if (sigma == 0.0 || kind == NoiseSpec::Kind::none) return NoiseSpec::none();
  switch (kind) {
    case NoiseSpec::Kind::gaussian: return NoiseSpec::gaussian(sigma, seed);
    case NoiseSpec::Kind::laplace: return NoiseSpec::laplace(sigma, seed);
    case NoiseSpec::Kind::exponential: return NoiseSpec::exponential(1.0 / sigma, seed);
    case NoiseSpec::Kind::none: break;
  }
  return NoiseSpec::none();
}

// ---------------------------------------------------------------- recover

RecoverGrid RecoverGrid::from_config(const Config& c) {
  require_known_keys(c);
  RecoverGrid g;
  g.n = c.integers("n", g.n);
  g.k = c.integers("k", g.k);
  g.r = c.integers("r", g.r);
  require_nonempty_positive(g.n, "n");
  require_nonempty_positive(g.k, "k");
  require_nonempty_positive(g.r, "r");
  g.R = c.integers("R");
  g.R_factor = c.reals("R_factor");
  if (!g.R.empty() && !g.R_factor.empty()) raise(ErrorCode::config, "give R or R_factor, not both");
  g.m_factor = c.reals("m_factor", g.m_factor);
  g.m_rule = parse_m_rule(c.text("m_rule", "nrk"));
  g.m = c.integers("m");
  require_nonempty_positive(g.m, "m");
  g.sigma = c.reals("sigma", g.sigma);
  g.noise = parse_list(c, "noise", g.noise, parse_noise_kind);
  g.eta = c.reals("eta");
  g.T = c.integers("T", g.T);
  g.alpha = c.reals("alpha");
  g.init = parse_list(c, "init", g.init, fgd::parse_init_kind);
  g.val_frac = c.reals("val_frac", g.val_frac);
  g.repeats = c.integer("repeats", 1);
  if (g.repeats < 1) raise(ErrorCode::config, "repeats must be at least 1");
  g.seed = c.unsigned_integer("seed", 0);
  g.diag_stride = c.integer("diag_stride", 0);
  g.traces = c.flag("traces", false);
  if (c.has("input")) g.input = fs::path(c.text("input", ""));
  for (double s : g.sigma)
    if (s < 0.0) raise(ErrorCode::config, "sigma must be nonnegative");
  for (double v : g.val_frac)
    if (!(v >= 0.0 && v < 1.0)) raise(ErrorCode::config, "val_frac must lie in [0, 1)");
  return g;
}

namespace {

struct InstanceKey {
  Index n, k, r, m, repeat;
  Seed seed;
  std::string input;
  auto tie() const { return std::tie(n, k, r, m, repeat, seed, input); }
  bool operator<(const InstanceKey& o) const { return tie() < o.tie(); }
};

struct SynthManifest {
  Index n = 0, k = 0, r = 0, m = 0, repeat = 0;
  double sigma = 0.0;
  NoiseSpec::Kind noise = NoiseSpec::Kind::none;
  Seed instance_seed = 0;
};

SynthManifest read_synth_manifest(const fs::path& dir) {
  std::ifstream is(dir / "manifest.json");
  if (!is) raise(ErrorCode::io, "cannot open " + (dir / "manifest.json").string());
  json j;
  try {
    is >> j;
    SynthManifest s;
    s.n = j.at("n").get<Index>();
    s.k = j.at("k").get<Index>();
    s.r = j.at("r").get<Index>();
    s.m = j.at("m").get<Index>();
    s.repeat = j.at("repeat").get<Index>();
    s.sigma = j.at("sigma").get<double>();
    s.noise = parse_noise_kind(j.at("noise").get<std::string>());
    s.instance_seed = j.at("instance_seed").get<Seed>();
    return s;
  } catch (const json::exception& e) {
    raise(ErrorCode::io, "malformed manifest in " + dir.string() + ": " + e.what());
  }
}

struct RecoverTask {
  InstanceKey key;
  std::vector<std::size_t> rows;
};

// Generates or loads one instance and runs all of its rows in one batch.
void run_instance(const RecoverTask& task, const std::vector<RecoverGrid>& grids,
                  const std::vector<std::size_t>& row_grid, std::vector<RecoverRow>& rows) {
  const InstanceKey& key = task.key;
  Seed inst = instance_seed(key.seed, key.n, key.k, key.r, key.m, key.repeat);
  std::optional<fgd::GroundTruth> gt;
  std::optional<SensingOperator> op;
  Eigen::VectorXd loaded_y;
  if (!key.input.empty()) {
    const fs::path dir(key.input);
    const SynthManifest man = read_synth_manifest(dir);
    inst = man.instance_seed;
    gt = fgd::ground_truth_from_star(io::load_tensor(dir / "X_star.tbl3"), key.r);
    op = load_operator(dir / "operator.tsns");
    loaded_y = io::load_vector(dir / "y.vec");
    if (op->n() != key.n || op->k() != key.k || op->m() != key.m || loaded_y.size() != key.m)
      raise(ErrorCode::io, "synth artifacts in " + dir.string() + " disagree with the manifest");
  } else {
    gt = fgd::make_ground_truth(key.n, key.r, key.k, inst);
    op = SensingOperator::gaussian(key.n, key.k, key.m, inst);
  }
  const Eigen::VectorXd clean = op->forward(gt->x_star);

  std::map<std::pair<int, double>, Eigen::VectorXd> ys;
  auto observations = [&](NoiseSpec::Kind kind, double sigma) -> const Eigen::VectorXd& {
    const auto id = std::make_pair(static_cast<int>(kind), sigma);
    auto it = ys.find(id);
    if (it == ys.end()) {
      Eigen::VectorXd y = clean;
      if (!key.input.empty()) {
        y = loaded_y;
      } else {
        const NoiseSpec spec = noise_at(kind, sigma, noise_seed(inst, kind));
        if (spec.kind != NoiseSpec::Kind::none) y += sample_noise(spec, key.m);
      }
      it = ys.emplace(id, std::move(y)).first;
    }
    return it->second;
  };

  std::vector<fgd::Run> runs, plain_runs;
  std::vector<es::SplitPlan> plans;
  std::vector<std::size_t> owners, plain_owners;
  for (std::size_t idx : task.rows) {
    RecoverRow& row = rows[idx];
    const RecoverGrid& grid = grids[row_grid[idx]];
    try {
      if (row.R < 1 || row.R > row.n) raise(ErrorCode::config, "R must lie in [1, n]");
      if (!(row.eta > 0.0)) raise(ErrorCode::config, "eta must be positive");
      if (row.T < 0) raise(ErrorCode::config, "T must be nonnegative");
      if (row.init != fgd::InitKind::spectral && !(row.alpha > 0.0))
        raise(ErrorCode::config, "alpha must be positive");
      const Eigen::VectorXd& y = observations(row.noise, row.sigma);
      // val_frac = 0 trains on every measurement with no early stopping.
      const bool stopping = row.val_frac > 0.0;
      es::SplitPlan plan;
      if (stopping) {
        plan = es::split(key.m, row.val_frac, derive_seed(inst, Stream::split, row.val_frac));
      } else {
        plan.train.resize(static_cast<std::size_t>(key.m));
        std::iota(plan.train.begin(), plan.train.end(), Index{0});
      }
      fgd::Run run;
      const Seed init_seed = derive_seed(inst, Stream::init, row.R);
      switch (row.init) {
        case fgd::InitKind::small:
          run.u0 = fgd::init_small(row.n, row.R, row.k, row.alpha, init_seed);
          break;
        case fgd::InitKind::large:
          run.u0 = fgd::init_large(row.n, row.R, row.k, init_seed, row.alpha);
          break;
        case fgd::InitKind::spectral:
          run.u0 = fgd::init_spectral(*op, y, plan.train, row.R);
          break;
      }
      run.y = y;
      run.eta = row.eta;
      run.T = row.T;
      run.diag_stride = grid.diag_stride;
      run.truth = &*gt;
      if (stopping) {
        runs.push_back(std::move(run));
        plans.push_back(std::move(plan));
        owners.push_back(idx);
      } else {
        plain_runs.push_back(std::move(run));
        plain_owners.push_back(idx);
      }
    } catch (const std::exception& e) {
      row.status = clean_status(e.what());
    }
  }

  if (!plain_runs.empty()) {
    std::vector<fgd::SolveResult> solved = fgd::solve_batch(*op, std::move(plain_runs));
    for (std::size_t b = 0; b < solved.size(); ++b) {
      RecoverRow& row = rows[plain_owners[b]];
      fgd::SolveTrace& trace = solved[b].trace;
      if (trace.diverged) {
        row.status = clean_status(trace.message);
      } else {
        row.rse_best = trace.min_rse();
        row.rse_final = trace.rows.back().rse;
      }
      if (grids[row_grid[plain_owners[b]]].traces) row.trace = std::move(trace);
    }
  }
  if (runs.empty()) return;

  std::vector<es::EarlyStopResult> results = es::run_batch(*op, std::move(runs), plans);
  for (std::size_t b = 0; b < results.size(); ++b) {
    RecoverRow& row = rows[owners[b]];
    es::EarlyStopResult& res = results[b];
    if (res.trace.diverged) {
      row.status = clean_status(res.trace.message);
    } else {
      row.rse_best = res.rse_best;
      row.rse_es = res.rse_at_t_check;
      row.rse_final = res.rse_final;
      row.t_check = res.t_check;
    }
    if (grids[row_grid[owners[b]]].traces) row.trace = std::move(res.trace);
  }
}

}  // namespace

std::vector<RecoverRow> run_recover(const std::vector<RecoverGrid>& grids, int workers,
                                    std::ostream* log) {
  std::vector<RecoverRow> rows;
  std::vector<std::size_t> row_grid;
  std::vector<InstanceKey> row_key;

  for (std::size_t gi = 0; gi < grids.size(); ++gi) {
    RecoverGrid g = grids[gi];
    std::string input;
    if (g.input) {
      const SynthManifest man = read_synth_manifest(*g.input);
      g.n = {man.n};
      g.k = {man.k};
      g.r = {man.r};
      g.m = {man.m};
      g.sigma = {man.sigma};
      g.noise = {man.noise};
      g.repeats = 1;
      input = g.input->string();
    }
    for (Index n : g.n)
      for (Index k : g.k)
        for (Index r : g.r) {
          std::vector<Index> ms = g.m;
          if (ms.empty())
            for (double f : g.m_factor) ms.push_back(measurement_count(g.m_rule, f, n, r, k));
          std::vector<Index> Rs = g.R;
          if (Rs.empty()) {
            if (g.R_factor.empty()) Rs.push_back(r);
            for (double f : g.R_factor)
              Rs.push_back(static_cast<Index>(std::llround(f * static_cast<double>(r))));
          }
          for (Index m : ms)
            for (Index R : Rs)
              for (double sigma : g.sigma)
                for (auto noise : g.noise)
                  for (auto init : g.init) {
                    const bool large = init == fgd::InitKind::large;
                    const std::vector<double> etas =
                        g.eta.empty() ? std::vector<double>{large ? fgd::kLargeInitEta : 0.1} : g.eta;
                    const std::vector<double> alphas =
                        g.alpha.empty() ? std::vector<double>{large ? fgd::kLargeInitAlpha : 1e-10}
                                        : g.alpha;
                    for (double eta : etas)
                      for (Index T : g.T)
                        for (double alpha : alphas)
                          for (double vf : g.val_frac)
                            for (Index rep = 0; rep < g.repeats; ++rep) {
                              RecoverRow row;
                              row.n = n;
                              row.k = k;
                              row.r = r;
                              row.R = R;
                              row.m = m;
                              row.sigma = sigma;
                              row.noise = noise;
                              row.eta = eta;
                              row.init = init;
                              row.alpha = init == fgd::InitKind::spectral ? fgd::kMissing : alpha;
                              row.T = T;
                              row.val_frac = vf;
                              row.repeat = rep;
                              rows.push_back(std::move(row));
                              row_grid.push_back(gi);
                              row_key.push_back(InstanceKey{n, k, r, m, rep, g.seed, input});
                            }
                  }
        }
  }

  std::vector<RecoverTask> tasks;
  std::map<InstanceKey, std::size_t> task_of;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    auto [it, fresh] = task_of.emplace(row_key[i], tasks.size());
    if (fresh) tasks.push_back(RecoverTask{row_key[i], {}});
    tasks[it->second].rows.push_back(i);
  }

  std::mutex log_mu;
  std::atomic<std::size_t> done{0};
  parallel_for(tasks.size(), workers, [&](std::size_t t) {
    const RecoverTask& task = tasks[t];
    try {
      run_instance(task, grids, row_grid, rows);
    } catch (const std::exception& e) {
      for (std::size_t idx : task.rows) rows[idx].status = clean_status(e.what());
    }
    std::ostringstream msg;
    msg << "recover: instance " << ++done << "/" << tasks.size() << " n=" << task.key.n
        << " k=" << task.key.k << " r=" << task.key.r << " m=" << task.key.m
        << " repeat=" << task.key.repeat << " (" << task.rows.size() << " runs)";
    log_line(log, log_mu, msg.str());
  });
  return rows;
}

void write_recover_csv(std::ostream& os, const std::vector<RecoverRow>& rows) {
  os << "n,k,r,R,m,sigma,eta,init,repeat,rse_best,rse_es,rse_final,t_check,noise,alpha,val_frac,T,"
        "status\n";
  for (const auto& r : rows) {
    os << r.n << ',' << r.k << ',' << r.r << ',' << r.R << ',' << r.m << ',' << num(r.sigma) << ','
       << num(r.eta) << ',' << fgd::to_string(r.init) << ',' << r.repeat << ',' << num(r.rse_best)
       << ',' << num(r.rse_es) << ',' << num(r.rse_final) << ',';
    if (r.t_check >= 0) os << r.t_check;
    os << ',' << to_string(r.noise) << ',' << num(r.alpha) << ',' << num(r.val_frac) << ',' << r.T
       << ',' << r.status << '\n';
  }
}

void write_recover_aggregate(std::ostream& os, const std::vector<RecoverRow>& rows) {
  using Key = std::tuple<Index, Index, Index, Index, Index, double, double, int, int, double,
                         double, Index>;
  std::vector<Key> order;
  std::map<Key, std::vector<const RecoverRow*>> groups;
  for (const auto& r : rows) {
    const double alpha = std::isnan(r.alpha) ? -1.0 : r.alpha;
    Key key{r.n, r.k, r.r, r.R, r.m, r.sigma, r.eta, static_cast<int>(r.init),
            static_cast<int>(r.noise), alpha, r.val_frac, r.T};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  os << "n,k,r,R,m,sigma,eta,init,noise,alpha,val_frac,T,count,failed,mean_rse_best,"
        "median_rse_best,mean_rse_es,median_rse_es,mean_rse_final,median_rse_final,"
        "median_t_check\n";
  for (const auto& key : order) {
    const auto& members = groups[key];
    std::vector<double> best, es_v, fin, tc;
    Index failed = 0;
    for (const RecoverRow* r : members) {
      if (!r->ok()) {
        ++failed;
        continue;
      }
      best.push_back(r->rse_best);
      es_v.push_back(r->rse_es);
      fin.push_back(r->rse_final);
      tc.push_back(static_cast<double>(r->t_check));
    }
    const RecoverRow& f = *members.front();
    os << f.n << ',' << f.k << ',' << f.r << ',' << f.R << ',' << f.m << ',' << num(f.sigma) << ','
       << num(f.eta) << ',' << fgd::to_string(f.init) << ',' << to_string(f.noise) << ','
       << num(f.alpha) << ',' << num(f.val_frac) << ',' << f.T << ','
       << static_cast<Index>(best.size()) << ',' << failed << ',' << num(mean(best)) << ','
       << num(median(best)) << ',' << num(mean(es_v)) << ',' << num(median(es_v)) << ','
       << num(mean(fin)) << ',' << num(median(fin)) << ',' << num(median(tc)) << '\n';
  }
}

// --------------------------------------------------------------- complete

CompleteGrid CompleteGrid::from_config(const Config& c) {
  require_known_keys(c);
  CompleteGrid g;
  g.n1 = c.integers("n1", g.n1);
  g.n2 = c.integers("n2", g.n2);
  g.k = c.integers("k", g.k);
  g.r = c.integers("r", g.r);
  require_nonempty_positive(g.n1, "n1");
  require_nonempty_positive(g.n2, "n2");
  require_nonempty_positive(g.k, "k");
  require_nonempty_positive(g.r, "r");
  g.p = c.reals("p", g.p);
  for (double p : g.p)
    if (!(p > 0.0 && p <= 1.0)) raise(ErrorCode::config, "p must lie in (0, 1]");
  g.sigma = c.reals("sigma", g.sigma);
  for (double s : g.sigma)
    if (s < 0.0) raise(ErrorCode::config, "sigma must be nonnegative");
  for (const auto& kind : c.strings("noise", {"gaussian"}))
    if (kind != "gaussian") raise(ErrorCode::config, "completion supports gaussian noise only");
  g.R = c.integers("R", g.R);
  g.eta = c.reals("eta", g.eta);
  g.T = c.integers("T", g.T);
  g.alpha = c.reals("alpha", g.alpha);
  g.val_frac = c.real("val_frac", g.val_frac);
  g.repeats = c.integer("repeats", 1);
  if (g.repeats < 1) raise(ErrorCode::config, "repeats must be at least 1");
  g.seed = c.unsigned_integer("seed", 0);
  g.traces = c.flag("traces", false);
  if (c.has("input")) g.input = fs::path(c.text("input", ""));
  return g;
}

std::vector<CompleteRow> run_complete(const CompleteGrid& grid, int workers, std::ostream* log) {
  std::optional<Tensor3> loaded;
  CompleteGrid g = grid;
  if (g.input) {
    loaded = io::load_tensor(*g.input);
    g.n1 = {loaded->n1()};
    g.n2 = {loaded->n2()};
    g.k = {loaded->k()};
  }
  std::vector<CompleteRow> rows;
  for (Index n1 : g.n1)
    for (Index n2 : g.n2)
      for (Index k : g.k)
        for (Index r : g.r)
          for (double p : g.p)
            for (double sigma : g.sigma)
              for (Index R : g.R)
                for (double eta : g.eta)
                  for (Index T : g.T)
                    for (double alpha : g.alpha)
                      for (Index rep = 0; rep < g.repeats; ++rep) {
                        CompleteRow row;
                        row.n1 = n1;
                        row.n2 = n2;
                        row.k = k;
                        row.r = r;
                        row.p = p;
                        row.sigma = sigma;
                        row.R = R;
                        row.eta = eta;
                        row.T = T;
                        row.alpha = alpha;
                        row.repeat = rep;
                        rows.push_back(row);
                      }

  std::mutex log_mu;
  std::atomic<std::size_t> done{0};
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    CompleteRow& row = rows[i];
    try {
      const Seed inst = derive_seed(g.seed, Stream::grid, row.n1, row.n2, row.k, row.r, row.repeat);
      const Tensor3 truth =
          loaded ? *loaded : completion::make_low_rank(row.n1, row.n2, row.r, row.k, inst);
      const io::Mask mask = completion::make_mask(row.n1, row.n2, row.k, row.p,
                                                  derive_seed(inst, Stream::mask, row.p));
      const auto obs = completion::observe(
          truth, mask, row.p,
          noise_at(NoiseSpec::Kind::gaussian, row.sigma, derive_seed(inst, Stream::noise)));
      const auto split = completion::carve_validation(obs.mask, g.val_frac,
                                                      derive_seed(inst, Stream::split, row.p));
      completion::CompletionConfig cfg;
      cfg.R = row.R;
      cfg.eta = row.eta;
      cfg.T = row.T;
      cfg.alpha = row.alpha;
      cfg.val_frac = g.val_frac;
      cfg.seed = derive_seed(inst, Stream::init, row.R);
      const auto res = completion::complete(obs, split, cfg, &truth);
      if (res.diverged) {
        row.status = clean_status(res.message);
      } else {
        row.re_best = res.re_best;
        row.re_es = res.re_es;
        row.re_final = res.re_final;
        row.psnr_best = res.psnr_best;
        row.psnr_es = res.psnr_es;
        row.t_check = res.t_check;
      }
      if (g.traces) {
        std::ostringstream os;
        completion::write_trace_csv(os, res);
        row.trace_csv = os.str();
      }
    } catch (const std::exception& e) {
      row.status = clean_status(e.what());
    }
    std::ostringstream msg;
    msg << "complete: run " << ++done << "/" << rows.size() << " p=" << row.p
        << " sigma=" << row.sigma << " R=" << row.R << " repeat=" << row.repeat;
    log_line(log, log_mu, msg.str());
  });
  return rows;
}

void write_complete_csv(std::ostream& os, const std::vector<CompleteRow>& rows) {
  os << "p,sigma,R,repeat,re_best,re_es,psnr_best,psnr_es,t_check,n1,n2,k,r,eta,T,alpha,re_final,"
        "status\n";
  for (const auto& r : rows) {
    os << num(r.p) << ',' << num(r.sigma) << ',' << r.R << ',' << r.repeat << ',' << num(r.re_best)
       << ',' << num(r.re_es) << ',' << num(r.psnr_best) << ',' << num(r.psnr_es) << ',';
    if (r.t_check >= 0) os << r.t_check;
    os << ',' << r.n1 << ',' << r.n2 << ',' << r.k << ',' << r.r << ',' << num(r.eta) << ',' << r.T
       << ',' << num(r.alpha) << ',' << num(r.re_final) << ',' << r.status << '\n';
  }
}

void write_complete_aggregate(std::ostream& os, const std::vector<CompleteRow>& rows) {
  using Key = std::tuple<Index, Index, Index, Index, double, double, Index, double, Index, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const CompleteRow*>> groups;
  for (const auto& r : rows) {
    Key key{r.n1, r.n2, r.k, r.r, r.p, r.sigma, r.R, r.eta, r.T, r.alpha};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  os << "p,sigma,R,n1,n2,k,r,eta,T,alpha,count,failed,mean_re_best,median_re_best,mean_re_es,"
        "median_re_es,mean_psnr_best,mean_psnr_es\n";
  for (const auto& key : order) {
    const auto& members = groups[key];
    std::vector<double> rb, re, pb, pe;
    Index failed = 0;
    for (const CompleteRow* r : members) {
      if (!r->ok()) {
        ++failed;
        continue;
      }
      rb.push_back(r->re_best);
      re.push_back(r->re_es);
      pb.push_back(r->psnr_best);
      pe.push_back(r->psnr_es);
    }
    const CompleteRow& f = *members.front();
    os << num(f.p) << ',' << num(f.sigma) << ',' << f.R << ',' << f.n1 << ',' << f.n2 << ','
       << f.k << ',' << f.r << ',' << num(f.eta) << ',' << f.T << ',' << num(f.alpha) << ','
       << static_cast<Index>(rb.size()) << ',' << failed << ',' << num(mean(rb)) << ','
       << num(median(rb)) << ',' << num(mean(re)) << ',' << num(median(re)) << ','
       << num(mean(pb)) << ',' << num(mean(pe)) << '\n';
  }
}

// ------------------------------------------------------------- trip-probe

ProbeGrid ProbeGrid::from_config(const Config& c) {
  require_known_keys(c);
  ProbeGrid g;
  g.n = c.integers("n", g.n);
  g.k = c.integers("k", g.k);
  g.r = c.integers("r", g.r);
  require_nonempty_positive(g.n, "n");
  require_nonempty_positive(g.k, "k");
  require_nonempty_positive(g.r, "r");
  g.m_factor = c.reals("m_factor", g.m_factor);
  g.repeats = c.integer("repeats", g.repeats);
  g.trials = c.integer("trials", g.trials);
  if (g.repeats < 1) raise(ErrorCode::config, "repeats must be at least 1");
  if (g.trials < 1) raise(ErrorCode::config, "trials must be at least 1");
  g.seed = c.unsigned_integer("seed", 0);
  const std::string kind = c.text("operator", "gaussian");
  if (kind == "identity") {
    g.identity = true;
  } else if (kind != "gaussian") {
    raise(ErrorCode::config, "operator must be gaussian or identity");
  }
  return g;
}

std::vector<ProbeRow> run_trip_probe(const ProbeGrid& g, int workers) {
  std::vector<ProbeRow> rows;
  for (Index n : g.n)
    for (Index k : g.k)
      for (Index r : g.r) {
        const std::vector<double> factors =
            g.identity ? std::vector<double>{static_cast<double>(n * k) / static_cast<double>(r)}
                       : g.m_factor;
        for (double f : factors)
          for (Index rep = 0; rep < g.repeats; ++rep) {
            ProbeRow row;
            row.n = n;
            row.k = k;
            row.r = r;
            row.m_factor = f;
            row.m = g.identity ? n * n * k : measurement_count(MRule::nrk, f, n, r, k);
            row.repeat = rep;
            row.trials = g.trials;
            rows.push_back(row);
          }
      }
  parallel_for(rows.size(), workers, [&](std::size_t i) {
    ProbeRow& row = rows[i];
    try {
      const Seed op_seed = derive_seed(g.seed, Stream::grid, row.n, row.k, row.m, row.repeat);
      const SensingOperator op = g.identity ? SensingOperator::identity_stub(row.n, row.k)
                                            : SensingOperator::gaussian(row.n, row.k, row.m, op_seed);
      row.delta_hat =
          empirical_trip_probe(op, row.r, row.trials, derive_seed(op_seed, Stream::probe, row.r))
              .delta_hat;
    } catch (const std::exception& e) {
      row.status = clean_status(e.what());
    }
  });
  return rows;
}

void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows) {
  os << "n,k,r,m,m_factor,repeat,trials,delta_hat,status\n";
  for (const auto& r : rows)
    os << r.n << ',' << r.k << ',' << r.r << ',' << r.m << ',' << num(r.m_factor) << ','
       << r.repeat << ',' << r.trials << ',' << num(r.delta_hat) << ',' << r.status << '\n';
}

void write_probe_summary(std::ostream& os, const std::vector<ProbeRow>& rows) {
  using Key = std::tuple<Index, Index, Index, double>;
  std::vector<Key> order;
  std::map<Key, std::vector<const ProbeRow*>> groups;
  for (const auto& r : rows) {
    Key key{r.n, r.k, r.r, r.m_factor};
    auto [it, fresh] = groups.try_emplace(key);
    if (fresh) order.push_back(key);
    it->second.push_back(&r);
  }
  os << "n,k,r,m_factor,m,count,median_delta_hat,max_delta_hat\n";
  for (const auto& key : order) {
    std::vector<double> d;
    for (const ProbeRow* r : groups[key])
      if (r->status == "ok") d.push_back(r->delta_hat);
    const ProbeRow& f = *groups[key].front();
    const double mx = d.empty() ? fgd::kMissing : *std::max_element(d.begin(), d.end());
    os << f.n << ',' << f.k << ',' << f.r << ',' << num(f.m_factor) << ',' << f.m << ','
       << static_cast<Index>(d.size()) << ',' << num(median(d)) << ',' << num(mx) << '\n';
  }
}

// ------------------------------------------------------------------ synth

std::vector<SynthFiles> run_synth(const RecoverGrid& g, const fs::path& out) {
  if (g.input) raise(ErrorCode::config, "synth does not take an input directory");
  const double sigma = g.sigma.front();
  const NoiseSpec::Kind kind = g.noise.front();
  std::vector<SynthFiles> written;
  for (Index n : g.n)
    for (Index k : g.k)
      for (Index r : g.r) {
        std::vector<Index> ms = g.m;
        if (ms.empty())
          for (double f : g.m_factor) ms.push_back(measurement_count(g.m_rule, f, n, r, k));
        for (Index m : ms)
          for (Index rep = 0; rep < g.repeats; ++rep) {
            const Seed inst = instance_seed(g.seed, n, k, r, m, rep);
            const fgd::GroundTruth gt = fgd::make_ground_truth(n, r, k, inst);
            const SensingOperator op = SensingOperator::gaussian(n, k, m, inst);
            const NoiseSpec spec = noise_at(kind, sigma, noise_seed(inst, kind));
            const Eigen::VectorXd noise = sample_noise(spec, m);
            const Eigen::VectorXd y = op.forward(gt.x_star) + noise;

            std::ostringstream name;
            name << "n" << n << "_k" << k << "_r" << r << "_m" << m << "_rep" << rep;
            SynthFiles files;
            files.dir = out / "synth" / name.str();
            std::error_code ec;
            fs::create_directories(files.dir, ec);
            if (ec) raise(ErrorCode::io, "cannot create " + files.dir.string() + ": " + ec.message());
            io::save_tensor(files.dir / "X_factor.tbl3", gt.x_factor);
            io::save_tensor(files.dir / "X_star.tbl3", gt.x_star);
            save_operator(files.dir / "operator.tsns", op);
            io::save_vector(files.dir / "noise.vec", noise);
            io::save_vector(files.dir / "y.vec", y);

            json man;
            man["n"] = n;
            man["k"] = k;
            man["r"] = r;
            man["m"] = m;
            man["repeat"] = rep;
            man["sigma"] = sigma;
            man["noise"] = to_string(spec.kind == NoiseSpec::Kind::none ? NoiseSpec::Kind::none : kind);
            man["master_seed"] = g.seed;
            man["instance_seed"] = inst;
            man["noise_seed"] = spec.seed;
            man["scaling"] = "raw";
            json sums = json::object();
            for (const char* f : {"X_factor.tbl3", "X_star.tbl3", "operator.tsns", "noise.vec", "y.vec"}) {
              const std::string crc = io::file_checksum(files.dir / f);
              sums[f] = crc;
              files.checksums.emplace_back(f, crc);
            }
            man["crc32"] = sums;
            std::ofstream os(files.dir / "manifest.json", std::ios::trunc);
            if (!os) raise(ErrorCode::io, "cannot write manifest in " + files.dir.string());
            os << man.dump(2) << '\n';
            written.push_back(std::move(files));
          }
      }
  return written;
}

// ---------------------------------------------------------------- driver

namespace {

void write_file(const fs::path& path, const std::function<void(std::ostream&)>& body) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) raise(ErrorCode::io, "cannot open " + path.string() + " for writing");
  body(os);
  if (!os) raise(ErrorCode::io, "write failed for " + path.string());
}

void write_manifest(const fs::path& out, const std::string& command, const fs::path& config,
                    const std::vector<fs::path>& outputs, const std::vector<fs::path>& inputs) {
  json j;
  j["command"] = command;
  j["config"] = {{"path", config.string()}, {"crc32", io::file_checksum(config)}};
  json in = json::object();
  for (const auto& p : inputs) in[p.string()] = io::file_checksum(p);
  j["inputs"] = in;
  json outs = json::object();
  for (const auto& p : outputs) outs[p.filename().string()] = io::file_checksum(p);
  j["outputs"] = outs;
  write_file(out / "manifest.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
}

ExitCode exit_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config: return ExitCode::config;
    case ErrorCode::io: return ExitCode::io;
    default: return ExitCode::run;
  }
}

ExitCode recover_command(const Config& cfg, const CommandOptions& opt, bool aggregate) {
  const RecoverGrid grid = RecoverGrid::from_config(cfg);
  std::vector<fs::path> inputs;
  if (grid.input)
    for (const char* f : {"X_star.tbl3", "operator.tsns", "y.vec", "manifest.json"})
      inputs.push_back(*grid.input / f);
  const auto rows = run_recover({grid}, opt.workers, opt.log);
  std::vector<fs::path> outputs{opt.out_dir / "recover.csv"};
  write_file(outputs.back(), [&](std::ostream& os) { write_recover_csv(os, rows); });
  if (aggregate) {
    outputs.push_back(opt.out_dir / "recover_aggregate.csv");
    write_file(outputs.back(), [&](std::ostream& os) { write_recover_aggregate(os, rows); });
  }
  if (grid.traces) {
    std::error_code ec;
    fs::create_directories(opt.out_dir / "traces", ec);
    if (ec) raise(ErrorCode::io, "cannot create traces directory: " + ec.message());
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (!rows[i].trace) continue;
      write_file(opt.out_dir / "traces" / ("recover_" + std::to_string(i) + ".csv"),
                 [&](std::ostream& os) {
                   fgd::write_trace_csv(os, *rows[i].trace,
                                        fgd::TraceCsvOptions{.val_loss = true, .elapsed = true});
                 });
    }
  }
  write_manifest(opt.out_dir, "recover", opt.config, outputs, inputs);
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return !r.ok(); });
  return failed ? ExitCode::run : ExitCode::ok;
}

ExitCode complete_command(const Config& cfg, const CommandOptions& opt, bool aggregate) {
  const CompleteGrid grid = CompleteGrid::from_config(cfg);
  std::vector<fs::path> inputs;
  if (grid.input) inputs.push_back(*grid.input);
  const auto rows = run_complete(grid, opt.workers, opt.log);
  std::vector<fs::path> outputs{opt.out_dir / "complete.csv"};
  write_file(outputs.back(), [&](std::ostream& os) { write_complete_csv(os, rows); });
  if (aggregate) {
    outputs.push_back(opt.out_dir / "complete_aggregate.csv");
    write_file(outputs.back(), [&](std::ostream& os) { write_complete_aggregate(os, rows); });
  }
  if (grid.traces) {
    std::error_code ec;
    fs::create_directories(opt.out_dir / "traces", ec);
    if (ec) raise(ErrorCode::io, "cannot create traces directory: " + ec.message());
    for (std::size_t i = 0; i < rows.size(); ++i)
      write_file(opt.out_dir / "traces" / ("complete_" + std::to_string(i) + ".csv"),
                 [&](std::ostream& os) { os << rows[i].trace_csv; });
  }
  write_manifest(opt.out_dir, "complete", opt.config, outputs, inputs);
  const bool failed = std::any_of(rows.begin(), rows.end(), [](const auto& r) { return !r.ok(); });
  return failed ? ExitCode::run : ExitCode::ok;
}

ExitCode probe_command(const Config& cfg, const CommandOptions& opt) {
  const ProbeGrid grid = ProbeGrid::from_config(cfg);
  const auto rows = run_trip_probe(grid, opt.workers);
  std::vector<fs::path> outputs{opt.out_dir / "trip_probe.csv", opt.out_dir / "trip_probe_summary.csv"};
  write_file(outputs[0], [&](std::ostream& os) { write_probe_csv(os, rows); });
  write_file(outputs[1], [&](std::ostream& os) { write_probe_summary(os, rows); });
  if (opt.log) write_probe_summary(*opt.log, rows);
  write_manifest(opt.out_dir, "trip-probe", opt.config, outputs, {});
  const bool failed =
      std::any_of(rows.begin(), rows.end(), [](const auto& r) { return r.status != "ok"; });
  return failed ? ExitCode::run : ExitCode::ok;
}

ExitCode synth_command(const Config& cfg, const CommandOptions& opt) {
  const RecoverGrid grid = RecoverGrid::from_config(cfg);
  const auto written = run_synth(grid, opt.out_dir);
  json j;
  j["command"] = "synth";
  j["config"] = {{"path", opt.config.string()}, {"crc32", io::file_checksum(opt.config)}};
  json dirs = json::array();
  for (const auto& w : written) {
    json sums = json::object();
    for (const auto& [f, crc] : w.checksums) sums[f] = crc;
    dirs.push_back({{"dir", fs::relative(w.dir, opt.out_dir).string()}, {"crc32", sums}});
  }
  j["instances"] = dirs;
  write_file(opt.out_dir / "manifest.json", [&](std::ostream& os) { os << j.dump(2) << '\n'; });
  if (opt.log) *opt.log << "synth: wrote " << written.size() << " instance(s)\n";
  return ExitCode::ok;
}

}  // namespace

ExitCode run_command(const CommandOptions& opt) {
  std::ostream* log = opt.log;
  try {
    const Config cfg = Config::load(opt.config);
    std::error_code ec;
    fs::create_directories(opt.out_dir, ec);
    if (ec) raise(ErrorCode::io, "cannot create " + opt.out_dir.string() + ": " + ec.message());
    std::string command = opt.command;
    bool aggregate = opt.aggregate;
    if (command == "sweep") {
      command = cfg.text("task", "recover");
      aggregate = true;
      if (command == "sweep" || command == "synth")
        raise(ErrorCode::config, "sweep task must be recover, complete or trip-probe");
    } else if (cfg.has("task") && cfg.text("task", "") != command) {
      raise(ErrorCode::config, "config task '" + cfg.text("task", "") + "' does not match command");
    }
    if (command == "recover") return recover_command(cfg, opt, aggregate);
    if (command == "complete") return complete_command(cfg, opt, aggregate);
    if (command == "trip-probe") return probe_command(cfg, opt);
    if (command == "synth") return synth_command(cfg, opt);
    raise(ErrorCode::config, "unknown command '" + opt.command + "'");
  } catch (const Error& e) {
    if (log) *log << "error: " << e.what() << '\n';
    return exit_for(e.code());
  } catch (const std::exception& e) {
    if (log) *log << "error: " << e.what() << '\n';
    return ExitCode::run;
  }
}

}  // namespace tubal::cli
