#include "tubal/tubal.h"

#include <iostream>
#include <string>

#include "tubal/error.hpp"
#include "tubal/experiment.hpp"
#include "tubal/fgd.hpp"
#include "tubal/io.hpp"
#include "tubal/sensing.hpp"
#include "tubal/talg.hpp"

struct tubal_tensor {
  tubal::Tensor3 value;
};

struct tubal_operator {
  tubal::SensingOperator value;
};

namespace {

thread_local std::string last_error;

tubal_status status_of(tubal::ErrorCode code) {
  using tubal::ErrorCode;
  switch (code) {
    case ErrorCode::invalid_argument: return TUBAL_INVALID_ARGUMENT;
    case ErrorCode::dimension_mismatch: return TUBAL_DIMENSION_MISMATCH;
    case ErrorCode::non_real: return TUBAL_NON_REAL;
    case ErrorCode::convergence: return TUBAL_CONVERGENCE;
    case ErrorCode::divergence: return TUBAL_DIVERGENCE;
    case ErrorCode::config: return TUBAL_CONFIG;
    case ErrorCode::io: return TUBAL_IO;
  }
  return TUBAL_INTERNAL;
}

// Runs fn, translating exceptions into a status and the thread's message.
template <class F>
tubal_status guard(F&& fn) {
  try {
    fn();
    last_error.clear();
    return TUBAL_OK;
  } catch (const tubal::Error& e) {
    last_error = e.what();
    return status_of(e.code());
  } catch (const std::bad_alloc&) {
    last_error = "out of memory";
    return TUBAL_INTERNAL;
  } catch (const std::exception& e) {
    last_error = e.what();
    return TUBAL_INTERNAL;
  }
}

template <class T>
void need(const T* p, const char* what) {
  if (!p) tubal::raise(tubal::ErrorCode::invalid_argument, std::string(what) + " is null");
}

tubal::Index idx(size_t v) { return static_cast<tubal::Index>(v); }

tubal_tensor* wrap(tubal::Tensor3 t) { return new tubal_tensor{std::move(t)}; }

}  // namespace

extern "C" {

const char* tubal_version(void) { return "0.1.0"; }

const char* tubal_status_string(tubal_status status) {
  switch (status) {
    case TUBAL_OK: return "ok";
    case TUBAL_INVALID_ARGUMENT: return "invalid argument";
    case TUBAL_DIMENSION_MISMATCH: return "dimension mismatch";
    case TUBAL_NON_REAL: return "non-real result";
    case TUBAL_CONVERGENCE: return "no convergence";
    case TUBAL_DIVERGENCE: return "divergence";
    case TUBAL_CONFIG: return "config error";
    case TUBAL_IO: return "I/O error";
    case TUBAL_INTERNAL: return "internal error";
  }
  return "unknown status";
}

const char* tubal_last_error(void) { return last_error.c_str(); }

tubal_status tubal_tensor_create(size_t n1, size_t n2, size_t k, const double* values,
                                 tubal_tensor** out) {
  return guard([&] {
    need(out, "out");
    tubal::Tensor3 t(idx(n1), idx(n2), idx(k));
    if (values) t = tubal::Tensor3(idx(n1), idx(n2), idx(k),
                                   std::vector<double>(values, values + n1 * n2 * k));
    *out = wrap(std::move(t));
  });
}

tubal_status tubal_tensor_identity(size_t n, size_t k, tubal_tensor** out) {
  return guard([&] {
    need(out, "out");
    *out = wrap(tubal::Tensor3::identity(idx(n), idx(k)));
  });
}

tubal_status tubal_tensor_gaussian(size_t n1, size_t n2, size_t k, uint64_t seed, tubal_tensor** out) {
  return guard([&] {
    need(out, "out");
    tubal::Rng rng(seed);
    *out = wrap(tubal::Tensor3::gaussian(idx(n1), idx(n2), idx(k), rng));
  });
}

void tubal_tensor_free(tubal_tensor* t) { delete t; }

tubal_status tubal_tensor_shape(const tubal_tensor* t, size_t* n1, size_t* n2, size_t* k) {
  return guard([&] {
    need(t, "tensor");
    if (n1) *n1 = static_cast<size_t>(t->value.n1());
    if (n2) *n2 = static_cast<size_t>(t->value.n2());
    if (k) *k = static_cast<size_t>(t->value.k());
  });
}

const double* tubal_tensor_data(const tubal_tensor* t) {
  return t ? t->value.values().data() : nullptr;
}

tubal_status tubal_tprod(const tubal_tensor* a, const tubal_tensor* b, tubal_tensor** out) {
  return guard([&] {
    need(a, "a");
    need(b, "b");
    need(out, "out");
    *out = wrap(tubal::tprod(a->value, b->value));
  });
}

tubal_status tubal_ttranspose(const tubal_tensor* t, tubal_tensor** out) {
  return guard([&] {
    need(t, "tensor");
    need(out, "out");
    *out = wrap(tubal::ttranspose(t->value));
  });
}

tubal_status tubal_tsvd(const tubal_tensor* t, tubal_tensor** V, tubal_tensor** S, tubal_tensor** W) {
  return guard([&] {
    need(t, "tensor");
    tubal::TSVD d = tubal::tsvd(t->value);
    if (V) *V = wrap(std::move(d.V));
    if (S) *S = wrap(std::move(d.S));
    if (W) *W = wrap(std::move(d.W));
  });
}

tubal_status tubal_tubal_rank(const tubal_tensor* t, double rel_tol, size_t* rank) {
  return guard([&] {
    need(t, "tensor");
    need(rank, "rank");
    const double tol = rel_tol > 0.0 ? rel_tol : tubal::kDefaultRankTol;
    *rank = static_cast<size_t>(tubal::tubal_rank(t->value, tol));
  });
}

tubal_status tubal_norms(const tubal_tensor* t, double* spectral, double* frobenius,
                         double* tubal_nuclear) {
  return guard([&] {
    need(t, "tensor");
    const tubal::Norms n = tubal::norms(t->value);
    if (spectral) *spectral = n.spectral;
    if (frobenius) *frobenius = n.frobenius;
    if (tubal_nuclear) *tubal_nuclear = n.tubal_nuclear;
  });
}

tubal_status tubal_tensor_save(const tubal_tensor* t, const char* path) {
  return guard([&] {
    need(t, "tensor");
    need(path, "path");
    tubal::io::save_tensor(path, t->value);
  });
}

tubal_status tubal_tensor_load(const char* path, tubal_tensor** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = wrap(tubal::io::load_tensor(path));
  });
}

tubal_status tubal_operator_gaussian(size_t n, size_t k, size_t m, uint64_t seed,
                                     tubal_scaling scaling, tubal_operator** out) {
  return guard([&] {
    need(out, "out");
    if (scaling != TUBAL_SCALING_RAW && scaling != TUBAL_SCALING_INV_SQRT_M)
      tubal::raise(tubal::ErrorCode::invalid_argument, "unknown scaling");
    *out = new tubal_operator{tubal::SensingOperator::gaussian(
        idx(n), idx(k), idx(m), seed, static_cast<tubal::Scaling>(scaling))};
  });
}

void tubal_operator_free(tubal_operator* op) { delete op; }

tubal_status tubal_operator_shape(const tubal_operator* op, size_t* n, size_t* k, size_t* m) {
  return guard([&] {
    need(op, "operator");
    if (n) *n = static_cast<size_t>(op->value.n());
    if (k) *k = static_cast<size_t>(op->value.k());
    if (m) *m = static_cast<size_t>(op->value.m());
  });
}

tubal_status tubal_operator_forward(const tubal_operator* op, const tubal_tensor* t, double* y) {
  return guard([&] {
    need(op, "operator");
    need(t, "tensor");
    need(y, "y");
    const Eigen::VectorXd v = op->value.forward(t->value);
    std::copy(v.data(), v.data() + v.size(), y);
  });
}

tubal_status tubal_operator_adjoint(const tubal_operator* op, const double* e, tubal_tensor** out) {
  return guard([&] {
    need(op, "operator");
    need(e, "e");
    need(out, "out");
    const Eigen::VectorXd v = Eigen::Map<const Eigen::VectorXd>(e, op->value.m());
    *out = wrap(op->value.adjoint(v));
  });
}

tubal_status tubal_operator_save(const tubal_operator* op, const char* path) {
  return guard([&] {
    need(op, "operator");
    need(path, "path");
    tubal::save_operator(path, op->value);
  });
}

tubal_status tubal_operator_load(const char* path, tubal_operator** out) {
  return guard([&] {
    need(path, "path");
    need(out, "out");
    *out = new tubal_operator{tubal::load_operator(path)};
  });
}

tubal_status tubal_trip_probe(const tubal_operator* op, size_t r, size_t trials, uint64_t seed,
                              double* delta_hat) {
  return guard([&] {
    need(op, "operator");
    need(delta_hat, "delta_hat");
    *delta_hat = tubal::empirical_trip_probe(op->value, idx(r), idx(trials), seed).delta_hat;
  });
}

tubal_status tubal_minimax_floor(size_t n, size_t r, size_t k, double sigma, size_t m, double delta,
                                 double* floor) {
  return guard([&] {
    need(floor, "floor");
    *floor = tubal::fgd::minimax_floor(idx(n), idx(r), idx(k), sigma, idx(m), delta);
  });
}

int tubal_run_command(const char* command, const char* config_path, const char* out_dir,
                      int workers, int aggregate, int verbose) {
  if (!command || !config_path) {
    last_error = "command and config path are required";
    return static_cast<int>(tubal::cli::ExitCode::config);
  }
  tubal::cli::CommandOptions opt;
  opt.command = command;
  opt.config = config_path;
  if (out_dir) opt.out_dir = out_dir;
  opt.workers = workers;
  opt.aggregate = aggregate != 0;
  opt.log = verbose ? &std::cerr : nullptr;
  const auto code = tubal::cli::run_command(opt);
  last_error.clear();
  return static_cast<int>(code);
}

}  // extern "C"
