#include "otfwi/optimizer.hpp"

#include <chrono>
#include <cmath>
#include <deque>

#include "otfwi/grid_io.hpp"
#include "otfwi/parallel.hpp"

namespace otfwi {

namespace {

VectorXd flatten(const MatrixXd& m) {
  return Eigen::Map<const VectorXd>(m.data(), m.size());
}

MatrixXd unflatten(const VectorXd& v, Eigen::Index rows, Eigen::Index cols) {
  return Eigen::Map<const MatrixXd>(v.data(), rows, cols);
}

struct EvalResult {
  double value = 0.0;
  VectorXd grad;
  std::vector<ShotRecord> synthetic;
};

}  // namespace

std::string misfit_tag(MisfitKind kind) {
  switch (kind) {
    case MisfitKind::l2: return "l2";
    case MisfitKind::w1d: return "w1d";
    case MisfitKind::w2d: return "w2d";
    case MisfitKind::j3: return "j3";
  }
  return "?";
}

MisfitKind misfit_from_tag(const std::string& tag) {
  if (tag == "l2") return MisfitKind::l2;
  if (tag == "w1d") return MisfitKind::w1d;
  if (tag == "w2d") return MisfitKind::w2d;
  if (tag == "j3") return MisfitKind::j3;
  throw config_error("unknown misfit tag '" + tag + "' (expected l2|w1d|w2d|j3)");
}

MisfitEval evaluate_misfit(const ShotRecord& synth, const ShotRecord& observed,
                           const InversionConfig& cfg) {
  switch (cfg.misfit) {
    case MisfitKind::l2:
      return misfit_l2(synth, observed);
    case MisfitKind::w1d:
      return misfit_j1(synth, observed, cfg.norm);
    case MisfitKind::j3:
      return misfit_j3(synth, observed, cfg.norm);
    case MisfitKind::w2d:
      try {
        return ma::misfit_j2(synth, observed, cfg.norm, cfg.ma);
      } catch (const numeric_error& e) {
        if (!cfg.ma_fallback_to_trace) throw;
        MisfitEval eval = misfit_j1(synth, observed, cfg.norm);
        eval.warnings.push_back(std::string("fell back to trace-by-trace W2: ") + e.what());
        return eval;
      }
  }
  throw config_error("evaluate_misfit: bad misfit kind");
}

MatrixXd effective_mask(const Grid2D& grid, const Acquisition& acq,
                        const InversionConfig& cfg) {
  MatrixXd mask = cfg.update_mask.size() > 0 ? cfg.update_mask
                                             : MatrixXd::Ones(grid.nz, grid.nx);
  if (mask.rows() != grid.nz || mask.cols() != grid.nx)
    throw config_error("update_mask shape does not match the model grid");

  // The absorbing-boundary rows carry model dependence the imaging condition
  // does not see; pin the one-cell ring.
  mask.row(0).setZero();
  mask.row(grid.nz - 1).setZero();
  mask.col(0).setZero();
  mask.col(grid.nx - 1).setZero();

  const int r = cfg.source_mask_radius;
  for (const auto& [z, x] : acq.sources) {
    const auto [iz, ix] = grid.nearest_node(z, x);
    for (int di = -r; di <= r; ++di)
      for (int dj = -r; dj <= r; ++dj) {
        const int i = iz + di, j = ix + dj;
        if (i >= 0 && i < grid.nz && j >= 0 && j < grid.nx && di * di + dj * dj <= r * r)
          mask(i, j) = 0.0;
      }
  }
  return mask;
}

GradientResult model_gradient(const VelocityModel& model, const Acquisition& acq,
                              const std::vector<ShotRecord>& observed,
                              const InversionConfig& cfg, bool keep_synthetic) {
  model.validate();
  acq.validate(model.grid);
  if (static_cast<int>(observed.size()) != acq.n_shots())
    throw config_error("model_gradient: need one observed record per shot");

  const int n_shots = acq.n_shots();
  std::vector<double> values(static_cast<size_t>(n_shots), 0.0);
  std::vector<MatrixXd> grads(static_cast<size_t>(n_shots));
  std::vector<ShotRecord> synth(static_cast<size_t>(n_shots));
  std::vector<std::vector<std::string>> warn(static_cast<size_t>(n_shots));

  parallel_for_index(n_shots, cfg.threads, [&](int s) {
    try {
      auto fwd = wave::forward(model, acq, s, true, cfg.sim);
      MisfitEval eval = evaluate_misfit(fwd.record, observed[static_cast<size_t>(s)], cfg);
      const Wavefield v = wave::adjoint_solve(model, acq, eval.adjoint_source, cfg.sim);
      grads[static_cast<size_t>(s)] = wave::imaging_condition(fwd.field, v, fwd.record.axis);
      values[static_cast<size_t>(s)] = eval.value;
      warn[static_cast<size_t>(s)] = std::move(eval.warnings);
      if (keep_synthetic) synth[static_cast<size_t>(s)] = std::move(fwd.record);
    } catch (const numeric_error& e) {
      throw numeric_error("shot " + std::to_string(s) + ": " + e.what());
    } catch (const config_error& e) {
      throw config_error("shot " + std::to_string(s) + ": " + e.what());
    }
  });

  GradientResult out;
  out.grad_m = MatrixXd::Zero(model.grid.nz, model.grid.nx);
  for (int s = 0; s < n_shots; ++s) {  // fixed reduction order
    out.misfit += values[static_cast<size_t>(s)];
    out.grad_m += grads[static_cast<size_t>(s)];
    for (auto& w : warn[static_cast<size_t>(s)])
      out.warnings.push_back("shot " + std::to_string(s) + ": " + std::move(w));
  }
  out.grad_m = out.grad_m.cwiseProduct(effective_mask(model.grid, acq, cfg));
  if (keep_synthetic) out.synthetic = std::move(synth);
  return out;
}

double model_error(const VelocityModel& current, const VelocityModel& truth,
                   bool normalized) {
  if (!current.grid.same_shape(truth.grid))
    throw config_error("model_error: grids differ");
  const double err = (current.c - truth.c).norm();
  return normalized ? err / truth.c.norm() : err;
}

InversionState lbfgs_minimize(const VelocityModel& initial, const Acquisition& acq,
                              const std::vector<ShotRecord>& observed,
                              const InversionConfig& cfg, const VelocityModel* truth,
                              const IterationCallback& callback) {
  using clock = std::chrono::steady_clock;
  initial.validate();
  if (cfg.lbfgs_memory < 1) throw config_error("lbfgs_memory must be >= 1");
  if (!(cfg.c_min_kms > 0) || cfg.c_min_kms >= cfg.c_max_kms)
    throw config_error("model bounds: need 0 < c_min < c_max");

  const Eigen::Index nz = initial.grid.nz, nx = initial.grid.nx;
  const double m_lo = 1.0 / std::pow(1e3 * cfg.c_max_kms, 2);
  const double m_hi = 1.0 / std::pow(1e3 * cfg.c_min_kms, 2);
  const MatrixXd mask = effective_mask(initial.grid, acq, cfg);
  const VectorXd mask_v = flatten(mask);

  auto model_from = [&](const VectorXd& x) {
    VelocityModel m;
    m.grid = initial.grid;
    m.c = VelocityModel::velocity_from_slowness_sq(unflatten(x, nz, nx));
    return m;
  };
  auto clip = [&](VectorXd x) {
    return x.cwiseMax(m_lo).cwiseMin(m_hi).eval();
  };
  const bool want_synth = static_cast<bool>(callback);
  auto eval_fg = [&](const VectorXd& x) {
    GradientResult r = model_gradient(model_from(x), acq, observed, cfg, want_synth);
    EvalResult e;
    e.value = r.misfit;
    e.grad = flatten(r.grad_m);
    e.synthetic = std::move(r.synthetic);
    return e;
  };

  InversionState state;
  state.model = initial;

  std::unique_ptr<CsvWriter> log;
  if (!cfg.log_csv.empty())
    log = std::make_unique<CsvWriter>(
        cfg.log_csv, std::vector<std::string>{"iter", "misfit", "grad_norm", "step_len",
                                              "model_error", "seconds"});
  auto log_row = [&](int it, double mis, double gn, double step, double secs) {
    const double merr = truth ? model_error(state.model, *truth, true) : -1.0;
    if (truth) state.model_error_history.push_back(merr);
    state.misfit_history.push_back(mis);
    state.grad_norm_history.push_back(gn);
    state.step_history.push_back(step);
    state.seconds_history.push_back(secs);
    if (log) log->row({double(it), mis, gn, step, merr, secs});
  };
  auto snapshot = [&](int it) {
    if (cfg.snapshot_every > 0 && !cfg.snapshot_dir.empty() && it % cfg.snapshot_every == 0) {
      char name[64];
      std::snprintf(name, sizeof(name), "model_iter%04d.otf", it);
      write_model(cfg.snapshot_dir / name, state.model);
    }
  };

  VectorXd x = clip(flatten(initial.slowness_sq_si()));
  auto t0 = clock::now();
  EvalResult cur = eval_fg(x);
  auto seconds_since = [&](clock::time_point& t) {
    const auto now = clock::now();
    const double s = std::chrono::duration<double>(now - t).count();
    t = now;
    return s;
  };

  const double g0_norm = cur.grad.norm();
  state.model = model_from(x);
  log_row(0, cur.value, g0_norm, 0.0, seconds_since(t0));
  if (callback) {
    IterationInfo info{1, cur.value, g0_norm, &state.model, &cur.synthetic};
    callback(info);
  }

  std::deque<VectorXd> mem_s, mem_y;
  bool fresh_restart = true;
  state.status = "max_iters";

  for (int it = 1; it <= cfg.max_iters; ++it) {
    // Two-loop recursion.
    VectorXd q = cur.grad;
    std::vector<double> alpha_mem(mem_s.size());
    for (int k = static_cast<int>(mem_s.size()) - 1; k >= 0; --k) {
      const double rho = 1.0 / mem_y[static_cast<size_t>(k)].dot(mem_s[static_cast<size_t>(k)]);
      alpha_mem[static_cast<size_t>(k)] = rho * mem_s[static_cast<size_t>(k)].dot(q);
      q -= alpha_mem[static_cast<size_t>(k)] * mem_y[static_cast<size_t>(k)];
    }
    if (!mem_s.empty()) {
      const double gamma = mem_s.back().dot(mem_y.back()) / mem_y.back().squaredNorm();
      q *= gamma;
    }
    for (size_t k = 0; k < mem_s.size(); ++k) {
      const double rho = 1.0 / mem_y[k].dot(mem_s[k]);
      const double beta = rho * mem_y[k].dot(q);
      q += (alpha_mem[k] - beta) * mem_s[k];
    }
    VectorXd p = (-q).cwiseProduct(mask_v);
    double dphi0 = cur.grad.dot(p);
    if (dphi0 >= 0.0) {  // not a descent direction; restart
      mem_s.clear();
      mem_y.clear();
      p = (-cur.grad).cwiseProduct(mask_v);
      dphi0 = cur.grad.dot(p);
      if (dphi0 >= 0.0) {
        state.status = cur.grad.norm() == 0.0 ? "converged" : "line_search_failure";
        break;
      }
    }

    // Initial trial step: cap the very first model update at
    // first_step_max_dc km/s; unit step once curvature information exists.
    double alpha;
    if (fresh_restart) {
      double max_dc = 0.0;
      for (Eigen::Index i = 0; i < x.size(); ++i) {
        const double dc_dm = 0.5e-3 * std::pow(x(i), -1.5);  // |dc/dm|, km/s units
        max_dc = std::max(max_dc, dc_dm * std::abs(p(i)));
      }
      alpha = max_dc > 0 ? cfg.first_step_max_dc_kms / max_dc : 1.0;
    } else {
      alpha = 1.0;
    }

    // Strong Wolfe line search along the projected path. Every trial
    // evaluates value and gradient; the accepted gradient seeds the next
    // iteration, so a clean unit step costs one evaluation.
    const double phi0 = cur.value;
    double a_lo = 0.0, a_hi = 0.0;  // a_hi == 0 means unbracketed
    bool wolfe_ok = false, has_fallback = false;
    EvalResult trial, fallback;
    VectorXd x_trial, x_fallback;
    double fallback_phi = 0.0;
    for (int ev = 0; ev < cfg.ls_max_evals; ++ev) {
      x_trial = clip(x + alpha * p);
      trial = eval_fg(x_trial);
      const double phi = trial.value;
      const double dphi = trial.grad.dot(p);
      if (phi > phi0 + cfg.wolfe_c1 * alpha * dphi0) {  // Armijo fails
        a_hi = alpha;
        alpha = 0.5 * (a_lo + a_hi);
        continue;
      }
      if (!has_fallback || phi < fallback_phi) {  // Armijo point in hand
        has_fallback = true;
        fallback = trial;
        fallback_phi = phi;
        x_fallback = x_trial;
      }
      if (std::abs(dphi) <= -cfg.wolfe_c2 * dphi0) {
        wolfe_ok = true;
        break;
      }
      if (dphi > 0.0) {  // walked past the minimum
        a_hi = alpha;
        alpha = 0.5 * (a_lo + a_hi);
      } else {  // still descending
        a_lo = alpha;
        alpha = a_hi > 0.0 ? 0.5 * (a_lo + a_hi) : 2.0 * alpha;
      }
    }
    if (!wolfe_ok && has_fallback) {
      trial = std::move(fallback);
      x_trial = std::move(x_fallback);
    }

    if (!wolfe_ok && !has_fallback) {
      if (!mem_s.empty()) {  // restart once from steepest descent
        mem_s.clear();
        mem_y.clear();
        fresh_restart = true;
        --it;
        continue;
      }
      state.status = "line_search_failure";
      break;
    }
    const VectorXd& x_new = x_trial;

    const VectorXd s = x_new - x;
    const VectorXd y = trial.grad - cur.grad;
    if (s.dot(y) > 1e-12 * s.norm() * y.norm()) {
      mem_s.push_back(s);
      mem_y.push_back(y);
      if (static_cast<int>(mem_s.size()) > cfg.lbfgs_memory) {
        mem_s.pop_front();
        mem_y.pop_front();
      }
    }
    x = x_new;
    cur = std::move(trial);
    fresh_restart = false;

    state.model = model_from(x);
    state.iterations = it;
    const double gn = cur.grad.norm();
    log_row(it, cur.value, gn, s.norm(), seconds_since(t0));
    snapshot(it);
    if (callback) {
      IterationInfo info{it + 1, cur.value, gn, &state.model, &cur.synthetic};
      callback(info);
    }
    if (cfg.grad_tol_rel > 0 && gn <= cfg.grad_tol_rel * g0_norm) {
      state.status = "converged";
      break;
    }
  }
  return state;
}

}  // namespace otfwi
