#include <cmath>

#include <doctest.h>

#include <adafuse/fusion.hpp>
#include <adafuse/numerics.hpp>
#include <adafuse/rng.hpp>
#include <adafuse/training.hpp>

#include "gradcheck_common.hpp"
#include "helpers.hpp"

using namespace adafuse;
using adafuse::test::pipeline_gradcheck;
using adafuse::test::random_params;
using adafuse::test::random_unit;
using adafuse::test::rel_err;

static_assert(sizeof(real) == sizeof(double),
              "gradient checks need the 64-bit storage build");

namespace {

FusionConfig tiny_config() {
  FusionConfig c;
  c.d = 6;
  c.d_proj = 8;
  c.d_mid = 4;
  c.d_hidden = 5;
  c.n_experts = 3;
  c.d_router = 4;
  return c;
}

} // namespace

TEST_CASE("fusion backward matches finite differences of a linear probe") {
  // Scalar loss L = c . z_final isolates the fusion jacobian from InfoNCE.
  const FusionConfig c = tiny_config();
  Rng rng(31);
  FusionParams params = random_params(c, rng, 0.4);
  const Vector z_t = random_unit(rng, c.d);
  const Vector z_d = random_unit(rng, c.d);
  Vector probe(c.d);
  for (std::size_t i = 0; i < c.d; ++i) {
    probe[i] = static_cast<real>(rng.uniform(-1.0, 1.0));
  }

  const auto loss_of = [&](const FusionParams& p, const Vector& t,
                           const Vector& d) {
    const ForwardResult f = fuse_forward(p, t, d);
    return dot(probe, f.z_final);
  };

  const ForwardResult f = fuse_forward(params, z_t, z_d);
  const BackwardResult back = fuse_backward(params, f.acts, z_t, z_d, probe);

  const double h = 1e-6;
  double max_err = 0;

  auto param_refs = params.tensors();
  const auto grad_refs = back.grads.tensors();
  for (std::size_t t = 0; t < param_refs.size(); ++t) {
    for (std::size_t i = 0; i < param_refs[t].size; ++i) {
      real& theta = param_refs[t].data[i];
      const real saved = theta;
      theta = saved + static_cast<real>(h);
      const double up = loss_of(params, z_t, z_d);
      theta = saved - static_cast<real>(h);
      const double down = loss_of(params, z_t, z_d);
      theta = saved;
      max_err = std::max(
          max_err, rel_err(grad_refs[t].data[i], (up - down) / (2 * h)));
    }
  }
  CHECK(max_err < 1e-5);

  // Input gradients through the same probe.
  for (std::size_t i = 0; i < c.d; ++i) {
    Vector t_up = z_t, t_down = z_t;
    t_up[i] += static_cast<real>(h);
    t_down[i] -= static_cast<real>(h);
    const double fd =
        (loss_of(params, t_up, z_d) - loss_of(params, t_down, z_d)) / (2 * h);
    CHECK(rel_err(back.grad_z_t[i], fd) < 1e-5);

    Vector d_up = z_d, d_down = z_d;
    d_up[i] += static_cast<real>(h);
    d_down[i] -= static_cast<real>(h);
    const double fd_d =
        (loss_of(params, z_t, d_up) - loss_of(params, z_t, d_down)) / (2 * h);
    CHECK(rel_err(back.grad_z_d[i], fd_d) < 1e-5);
  }
}

TEST_CASE("InfoNCE gradients match finite differences") {
  const std::size_t B = 4, d = 8;
  Rng rng(32);
  Matrix q(B, d), t(B, d);
  for (std::size_t b = 0; b < B; ++b) {
    const Vector qv = random_unit(rng, d);
    const Vector tv = random_unit(rng, d);
    for (std::size_t j = 0; j < d; ++j) {
      q.at(b, j) = qv[j];
      t.at(b, j) = tv[j];
    }
  }
  const double tau = 0.1;
  const InfoNceResult res = info_nce_loss(q, t, tau);
  CHECK(std::isfinite(res.loss));

  const double h = 1e-6;
  double max_err = 0;
  for (std::size_t b = 0; b < B; ++b) {
    for (std::size_t j = 0; j < d; ++j) {
      // The gradient is taken at fixed coordinates; FD must not re-normalize.
      Matrix qp = q, qm = q;
      qp.at(b, j) += static_cast<real>(h);
      qm.at(b, j) -= static_cast<real>(h);
      const double fd =
          (info_nce_loss(qp, t, tau).loss - info_nce_loss(qm, t, tau).loss) /
          (2 * h);
      max_err = std::max(max_err, rel_err(res.grad_zq.at(b, j), fd));

      Matrix tp = t, tm = t;
      tp.at(b, j) += static_cast<real>(h);
      tm.at(b, j) -= static_cast<real>(h);
      const double fd_t =
          (info_nce_loss(q, tp, tau).loss - info_nce_loss(q, tm, tau).loss) /
          (2 * h);
      max_err = std::max(max_err, rel_err(res.grad_zt.at(b, j), fd_t));
    }
  }
  CHECK(max_err < 1e-5);
}

TEST_CASE("full pipeline gradients match finite differences") {
  const FusionConfig c = tiny_config();
  const auto report = pipeline_gradcheck(c, 33, 3, 0.15, 1e-5);
  INFO("worst tensor: ", report.worst_tensor);
  CHECK(report.checked == count_params(c));
  CHECK(report.max_rel_err < 1e-4);
}
