#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "tubal/config.hpp"
#include "tubal/fgd.hpp"
#include "tubal/sensing.hpp"

namespace tubal::cli {

enum class ExitCode : int { ok = 0, config = 1, run = 2, io = 3 };

/// How m is derived from m_factor when no explicit m is given.
enum class MRule {
  nrk,   ///< m = m_factor * n r k
  two_cm,  ///< m = 2 C_m n r k with C_m = m_factor
  kr2n,  ///< m = m_factor * k r (2n - r)
};

MRule parse_m_rule(std::string_view name);
Index measurement_count(MRule rule, double factor, Index n, Index r, Index k);

/// Noise of kind `kind` at scale sigma: the Gaussian standard deviation, the
/// Laplace b, or 1/lambda for the exponential law. sigma = 0 is noiseless.
NoiseSpec noise_at(NoiseSpec::Kind kind, double sigma, Seed seed);

// ---------------------------------------------------------------- recover

struct RecoverGrid {
  std::vector<Index> n{30}, k{3}, r{3};
  std::vector<Index> R;            ///< explicit ranks, or
  std::vector<double> R_factor;    ///< ranks as multiples of r
  std::vector<double> m_factor{10.0};
  MRule m_rule = MRule::nrk;
  std::vector<Index> m;            ///< explicit counts override m_factor
  std::vector<double> sigma{1e-3};
  std::vector<NoiseSpec::Kind> noise{NoiseSpec::Kind::gaussian};
  std::vector<double> eta;         ///< empty: 0.1, or 1e-3 for large init
  std::vector<Index> T{5000};
  std::vector<double> alpha;       ///< empty: 1e-10, or 10 for large init
  std::vector<fgd::InitKind> init{fgd::InitKind::small};
  std::vector<double> val_frac{0.05};  ///< 0 trains on all of y with no early stopping
  Index repeats = 1;
  Seed seed = 0;
  Index diag_stride = 0;
  bool traces = false;
  /// Directory written by synth; replaces generation of X_star, A and y.
  std::optional<std::filesystem::path> input;

  static RecoverGrid from_config(const Config& c);
};

struct RecoverRow {
  Index n = 0, k = 0, r = 0, R = 0, m = 0;
  double sigma = 0.0;
  NoiseSpec::Kind noise = NoiseSpec::Kind::gaussian;
  double eta = 0.0;
  fgd::InitKind init = fgd::InitKind::small;
  double alpha = 0.0;
  Index T = 0;
  double val_frac = 0.0;
  Index repeat = 0;
  double rse_best = fgd::kMissing;
  double rse_es = fgd::kMissing;
  double rse_final = fgd::kMissing;
  Index t_check = -1;
  std::string status = "ok";
  /// Filled only when the grid asks for traces.
  std::optional<fgd::SolveTrace> trace;

  bool ok() const { return status == "ok"; }
};

/// Runs every grid point and repeat. Points of different grids that share an
/// instance (n, k, r, m, repeat, seed) share one pass over its measurements.
/// Output order is grid order, then point order, then repeat, independent of
/// the worker count.
std::vector<RecoverRow> run_recover(const std::vector<RecoverGrid>& grids, int workers = 1,
                                    std::ostream* log = nullptr);

void write_recover_csv(std::ostream& os, const std::vector<RecoverRow>& rows);
/// Mean and median over repeats of each grid point, failed rows excluded.
void write_recover_aggregate(std::ostream& os, const std::vector<RecoverRow>& rows);

// --------------------------------------------------------------- complete

struct CompleteGrid {
  std::vector<Index> n1{60}, n2{60}, k{3}, r{5};
  std::vector<double> p{0.3};
  std::vector<double> sigma{0.03};
  std::vector<Index> R{15};
  std::vector<double> eta{1e-3};
  std::vector<Index> T{2000};
  std::vector<double> alpha{1e-5};
  double val_frac = 0.05;
  Index repeats = 1;
  Seed seed = 0;
  bool traces = false;
  /// Truth tensor file; replaces the synthetic generator.
  std::optional<std::filesystem::path> input;

  static CompleteGrid from_config(const Config& c);
};

struct CompleteRow {
  Index n1 = 0, n2 = 0, k = 0, r = 0;
  double p = 0.0, sigma = 0.0;
  Index R = 0;
  double eta = 0.0;
  Index T = 0;
  double alpha = 0.0;
  Index repeat = 0;
  double re_best = fgd::kMissing, re_es = fgd::kMissing, re_final = fgd::kMissing;
  double psnr_best = fgd::kMissing, psnr_es = fgd::kMissing;
  Index t_check = -1;
  std::string status = "ok";
  std::string trace_csv;  ///< filled only when traces are requested

  bool ok() const { return status == "ok"; }
};

std::vector<CompleteRow> run_complete(const CompleteGrid& grid, int workers = 1,
                                      std::ostream* log = nullptr);
void write_complete_csv(std::ostream& os, const std::vector<CompleteRow>& rows);
void write_complete_aggregate(std::ostream& os, const std::vector<CompleteRow>& rows);

// ------------------------------------------------------------- trip-probe

struct ProbeGrid {
  std::vector<Index> n{10}, k{3}, r{2};
  std::vector<double> m_factor{2.0, 5.0, 10.0};
  Index repeats = 10;
  Index trials = 200;
  Seed seed = 0;
  bool identity = false;  ///< use the exact isometry stub instead

  static ProbeGrid from_config(const Config& c);
};

struct ProbeRow {
  Index n = 0, k = 0, r = 0, m = 0;
  double m_factor = 0.0;
  Index repeat = 0;
  Index trials = 0;
  double delta_hat = fgd::kMissing;
  std::string status = "ok";
};

std::vector<ProbeRow> run_trip_probe(const ProbeGrid& grid, int workers = 1);
void write_probe_csv(std::ostream& os, const std::vector<ProbeRow>& rows);
/// Median and max delta_hat per (n, k, r, m_factor).
void write_probe_summary(std::ostream& os, const std::vector<ProbeRow>& rows);

// ------------------------------------------------------------------ synth

struct SynthFiles {
  std::filesystem::path dir;
  std::vector<std::pair<std::string, std::string>> checksums;  ///< file name, CRC-32
};

/// Writes X_factor, X_star, operator, noise and y for every (n, k, r, m,
/// repeat) of the grid (first sigma and noise kind) plus manifest.json.
std::vector<SynthFiles> run_synth(const RecoverGrid& grid, const std::filesystem::path& out);

// ---------------------------------------------------------------- driver

struct CommandOptions {
  std::string command;
  std::filesystem::path config;
  std::filesystem::path out_dir = ".";
  int workers = 1;
  bool aggregate = false;
  std::ostream* log = nullptr;
};

/// Parses the config, runs the command and writes its outputs. Never throws;
/// failures are reported on `log` and mapped to an exit code.
ExitCode run_command(const CommandOptions& options);

}  // namespace tubal::cli
