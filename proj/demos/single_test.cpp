#include <cstdio>

#include "k2gof/k2gof.hpp"

using namespace k2gof;

int main() {
  auto registry = register_builtin_models();
  const ModelSpec& q_spec = find_model(registry, "Q");
  const ModelSpec& f2_spec = find_model(registry, "F2");
  GridPtr grid = build_grid(builtin::paper_region(), 50, 40);

  ParamVector theta{{-2.0, 5.0, 25.0}, {"t1", "t2", "t3"}};
  ModelInstancePtr q = instantiate(q_spec, theta, grid);
  std::printf("Q mass = %.15f  norm_const = %g\n", integrate(q->density_field()),
              q->norm_const());
  std::printf("cdf at max node = %.15f\n", q->cdf_table()[grid->size() - 1]);

  // score mean zero
  GridField one = GridField::constant(grid, 1.0);
  NormalizedScores b = normalized_scores(q, grid);
  for (int j = 0; j < 3; ++j) {
    std::printf("<b%d,1>_Q = %.3e  <b%d,b%d>_Q = %.15f\n", j,
                inner_product(b.field(j), one, q->density_field()), j, j,
                inner_product(b.field(j), b.field(j), q->density_field()));
  }
  std::printf("<b0,b1>_Q = %.3e\n",
              inner_product(b.field(0), b.field(1), q->density_field()));

  // FD vs analytic scores at a point
  Point pt{10.0, 12.0};
  auto u_analytic = q->score(pt);
  ModelSpec q_fd = q_spec;
  q_fd.score_mode = ScoreMode::kFiniteDifference;
  ModelInstancePtr qf = instantiate(q_fd, theta, grid);
  auto u_fd = qf->score(pt);
  for (int j = 0; j < 3; ++j)
    std::printf("score[%d] analytic %.10f fd %.10f diff %.2e\n", j, u_analytic[j], u_fd[j],
                u_analytic[j] - u_fd[j]);

  // sampling determinism + support
  RngStream rng(42, 7);
  auto pts = q->sample(5, rng);
  RngStream rng2(42, 7);
  auto pts2 = q->sample(5, rng2);
  std::printf("sample determinism: %d\n", pts == pts2);

  // projection plan and membership at fixed x
  ProjectionPlanPtr proj = build_projection_plan(q, grid);
  std::printf("proj_coeff at max node: %.3e %.3e %.3e\n",
              proj->proj_coeff()[0][grid->size() - 1], proj->proj_coeff()[1][grid->size() - 1],
              proj->proj_coeff()[2][grid->size() - 1]);

  // two-route equality at a probe node
  {
    const int node = grid->index(30, 25);
    std::vector<double> psi_vals(grid->size());
    for (int i = 0; i < grid->n1(); ++i)
      for (int j = 0; j < grid->n2(); ++j)
        psi_vals[grid->index(i, j)] =
            ((i <= 30 && j <= 25) ? 1.0 : 0.0) - q->cdf_table()[node];
    GridField psi_field(grid, psi_vals);
    for (int j = 0; j < 3; ++j) {
      const double direct = inner_product(b.field(j), psi_field, q->density_field());
      std::printf("two-route j=%d: direct %.12e prefix %.12e diff %.2e\n", j, direct,
                  proj->proj_coeff()[j][node], direct - proj->proj_coeff()[j][node]);
    }
  }

  // rotation Q -> F2
  ParamVector beta{{6.0, 7.0, 40.0}, {"b1", "b2", "b3"}};
  ModelInstancePtr f2 = instantiate(f2_spec, beta, grid);
  RotationPlanPtr rot = build_rotation_plan(q, f2, grid, proj);
  const RotationAudit& a = rot->audit();
  std::printf("audit: c_mean %.2e ctilde_cross %.2e chain_map %.2e three_way %.2e l in [%g, %g]\n",
              a.max_c_mean, a.max_ctilde_cross, a.max_chain_map, a.max_three_way, a.min_l,
              a.max_l);

  // unitarity of K and the isometry identity
  {
    RngStream r(1, 2);
    std::vector<double> gv(grid->size()), hv(grid->size());
    for (auto& x : gv) x = r.normal();
    for (auto& x : hv) x = r.normal();
    GridField g(grid, gv), h(grid, hv);
    const GridField& fd = f2->density_field();
    GridField lg = g, lh = h;
    for (int k = 0; k < grid->size(); ++k) {
      lg[k] *= rot->l_field()[k];
      lh[k] *= rot->l_field()[k];
    }
    std::printf("isometry identity: %.3e\n",
                inner_product(lg, lh, fd) - inner_product(g, h, q->density_field()));
    GridField kg = apply_K(g, rot->l_field(), fd), kh = apply_K(h, rot->l_field(), fd);
    std::printf("K unitarity: %.3e\n", inner_product(kg, kh, fd) - inner_product(g, h, fd));
    GridField ug = rot->apply_u_chain(g), uh = rot->apply_u_chain(h);
    std::printf("U unitarity: %.3e\n", inner_product(ug, uh, fd) - inner_product(g, h, fd));
  }

  // self-rotation equality
  {
    ModelInstancePtr q2 = instantiate(q_spec, theta, grid);
    RotationPlanPtr self = build_rotation_plan(q, q2, grid, proj);
    RngStream r(9, 1);
    auto data = q->sample(100, r);
    ProcessField vp = projected_process(data, *proj);
    ProcessField vr = rotated_process(data, *self);
    double maxdiff = 0;
    for (int k = 0; k < grid->size(); ++k)
      maxdiff = std::max(maxdiff, std::abs(vp.field[k] - vr.field[k]));
    std::printf("self-rotation max diff: %.3e\n", maxdiff);
    std::printf("projected at max node: %.3e\n", vp.field[grid->size() - 1]);

    ProcessField vf2 = rotated_process(data, *rot);
    StatTriple s = compute_stats(vf2, q->density_field(), q->cdf_table());
    std::printf("rotated F2 stats: D %.4f w2 %.4f A2 %.4f\n", s.d, s.omega2, s.a2);
  }

  // MLE recovery
  {
    RngStream r(5, 3);
    auto data = q->sample(10000, r);
    FitResult fit = mle_fit(q_spec, data, grid);
    std::printf("mle: (%.4f, %.4f, %.4f) loglik %.3f conv %d iters %d\n",
                fit.params.values[0], fit.params.values[1], fit.params.values[2],
                fit.log_likelihood, fit.converged, fit.iterations);
  }
  return 0;
}
