#include "gaudp/harness/gradcheck_suite.hpp"

#include <functional>
#include <sstream>

#include "gaudp/nn/gradcheck.hpp"
#include "gaudp/nn/rng.hpp"
#include "gaudp/nn/tape.hpp"
#include "gaudp/recon.hpp"
#include "gaudp/renderer.hpp"

namespace gaudp {

namespace {

using nn::Tensor64;

Tensor64 randn(std::vector<std::size_t> shape, nn::Rng& rng, double scale = 1.0) {
  Tensor64 t(std::move(shape));
  for (auto& v : t.data) v = rng.normal() * scale;
  return t;
}

using Builder = std::function<int(nn::Tape<double>&, const std::vector<int>&)>;

double check_inputs(std::vector<Tensor64> inputs, const Builder& build, double h = 1e-6) {
  auto eval = [&]() {
    nn::Tape<double> tape;
    std::vector<int> ids;
    for (auto& t : inputs) ids.push_back(tape.leaf(t, false));
    return tape.val(build(tape, ids))[0];
  };
  double worst = 0;
  for (std::size_t which = 0; which < inputs.size(); ++which) {
    nn::Tape<double> tape;
    std::vector<int> ids;
    for (auto& t : inputs) ids.push_back(tape.leaf(t, true));
    tape.backward(build(tape, ids));
    Tensor64 analytic = tape.grad(ids[which]);
    auto res = nn::fd_check(inputs[which], analytic, eval, h);
    worst = std::max(worst, res.max_rel);
  }
  return worst;
}

double renderer_check(std::uint64_t seed) {
  // compact version of the renderer FD oracle
  CameraModel cam;
  cam.fx = cam.fy = 10;
  cam.cx = cam.cy = 5.5;
  cam.width = cam.height = 12;
  cam.z_near = 0.1;
  cam.z_far = 50;
  nn::Rng rng(seed);
  std::vector<RawGaussian> raws(6);
  for (auto& raw : raws) {
    raw.mu = Vec3(rng.uniform(-0.6, 0.6), rng.uniform(-0.6, 0.6), rng.uniform(2.0, 3.5));
    raw.log_scale = Vec3::Constant(-1.2 + 0.2 * rng.normal());
    raw.rot_raw = Vec4(1 + 0.2 * rng.normal(), 0.2 * rng.normal(), 0.2 * rng.normal(),
                       0.2 * rng.normal());
    raw.opacity_logit = rng.normal();
    raw.color_raw = Vec3(rng.normal(), rng.normal(), rng.normal());
  }
  Tensor64 weights({12, 12, 3});
  for (auto& v : weights.data) v = rng.normal();

  RenderOptions opts;
  auto make = [&]() {
    RenderBatch b;
    b.group_to_cam.push_back(RigidTransform{});
    for (auto& r : raws) b.push(&r, 0);
    return b;
  };
  auto eval = [&]() {
    RenderOutput out = render_batch(make(), cam, opts);
    double loss = 0;
    for (std::size_t i = 0; i < out.rgb.numel(); ++i) loss += out.rgb[i] * weights[i];
    return loss;
  };
  RenderBatch batch = make();
  RenderCachePtr cache;
  render_batch(batch, cam, opts, &cache);
  UpstreamGrad up = UpstreamGrad::zeros(12, 12);
  up.d_rgb = weights;
  auto grads = render_batch_backward(batch, cam, opts, *cache, up);

  double worst = 0;
  double h = 1e-4;
  auto fd_one = [&](double* slot, double analytic) {
    double saved = *slot;
    *slot = saved + h;
    double a = eval();
    *slot = saved - h;
    double b = eval();
    *slot = saved;
    worst = std::max(worst, nn::rel_error(analytic, (a - b) / (2 * h), 1e-6));
  };
  for (std::size_t i = 0; i < raws.size(); ++i) {
    for (int k = 0; k < 3; ++k) {
      fd_one(&raws[i].mu[k], grads[i].mu[k]);
      fd_one(&raws[i].log_scale[k], grads[i].log_scale[k]);
      fd_one(&raws[i].color_raw[k], grads[i].color_raw[k]);
    }
    for (int k = 0; k < 4; ++k) fd_one(&raws[i].rot_raw[k], grads[i].rot_raw[k]);
    fd_one(&raws[i].opacity_logit, grads[i].opacity_logit);
  }
  return worst;
}

}  // namespace

std::vector<GradCheckRow> run_gradcheck_suite() {
  std::vector<GradCheckRow> rows;
  nn::Rng rng(2024);
  auto mse_of = [](nn::Tape<double>& t, int y) {
    return t.mse_const(y, Tensor64(t.val(y).shape));
  };
  auto add_row = [&](const std::string& name, double rel, double tol) {
    rows.push_back(GradCheckRow{name, rel, tol, rel < tol});
  };

  add_row("linear",
          check_inputs({randn({3, 5}, rng), randn({5, 4}, rng), randn({4}, rng)},
                       [&](auto& t, const auto& id) {
                         return mse_of(t, t.linear(id[0], id[1], id[2]));
                       }),
          1e-4);
  add_row("conv2d_3x3",
          check_inputs({randn({2, 6, 6}, rng), randn({3, 2, 3, 3}, rng, 0.5), randn({3}, rng)},
                       [&](auto& t, const auto& id) {
                         return mse_of(t, t.conv2d(id[0], id[1], id[2], 1, 1));
                       }),
          1e-4);
  add_row("conv2d_1x1",
          check_inputs({randn({4, 5, 5}, rng), randn({2, 4, 1, 1}, rng), randn({2}, rng)},
                       [&](auto& t, const auto& id) {
                         return mse_of(t, t.conv2d(id[0], id[1], id[2], 1, 0));
                       }),
          1e-4);
  add_row("strided_conv",
          check_inputs({randn({2, 8, 8}, rng), randn({3, 2, 3, 3}, rng, 0.5), randn({3}, rng)},
                       [&](auto& t, const auto& id) {
                         return mse_of(t, t.conv2d(id[0], id[1], id[2], 2, 1));
                       }),
          1e-4);
  add_row("layernorm",
          check_inputs({randn({4, 6}, rng), randn({6}, rng), randn({6}, rng)},
                       [&](auto& t, const auto& id) {
                         return mse_of(t, t.layernorm(id[0], id[1], id[2]));
                       }),
          1e-4);
  add_row("gelu", check_inputs({randn({3, 7}, rng)}, [&](auto& t, const auto& id) {
            return mse_of(t, t.gelu(id[0]));
          }),
          1e-4);
  add_row("softmax", check_inputs({randn({4, 5}, rng)}, [&](auto& t, const auto& id) {
            return mse_of(t, t.softmax_lastdim(id[0]));
          }),
          1e-4);
  {
    std::vector<Tensor64> inputs;
    inputs.push_back(randn({4, 6}, rng));
    for (int i = 0; i < 4; ++i) {
      inputs.push_back(randn({6, 6}, rng, 0.5));
      inputs.push_back(randn({6}, rng, 0.1));
    }
    add_row("self_attention", check_inputs(std::move(inputs), [&](auto& t, const auto& id) {
              return mse_of(t, t.mha(id[0], id[0], id[1], id[2], id[3], id[4], id[5], id[6],
                                     id[7], id[8], 2));
            }),
            1e-4);
  }
  {
    std::vector<Tensor64> inputs;
    inputs.push_back(randn({3, 6}, rng));
    inputs.push_back(randn({5, 6}, rng));
    for (int i = 0; i < 4; ++i) {
      inputs.push_back(randn({6, 6}, rng, 0.5));
      inputs.push_back(randn({6}, rng, 0.1));
    }
    add_row("cross_attention", check_inputs(std::move(inputs), [&](auto& t, const auto& id) {
              return mse_of(t, t.mha(id[0], id[1], id[2], id[3], id[4], id[5], id[6], id[7],
                                     id[8], id[9], 3));
            }),
            1e-4);
  }
  {
    // sinusoidal_embed carries no parameters; verify the composed use site
    add_row("sinusoidal_embed",
            check_inputs({randn({2, 8}, rng)},
                         [&](auto& t, const auto& id) {
                           int e = t.leaf(nn::sinusoidal_embed<double>(5.0, 8));
                           return mse_of(t, t.row_broadcast_add(id[0], e));
                         }),
            1e-4);
  }
  add_row("renderer", renderer_check(77), 1e-3);
  return rows;
}

std::string format_gradcheck(const std::vector<GradCheckRow>& rows) {
  std::ostringstream os;
  os << "primitive         max_rel      tol     status\n";
  for (const auto& row : rows) {
    char line[128];
    std::snprintf(line, sizeof(line), "%-17s %.3e  %.0e  %s\n", row.name.c_str(), row.max_rel,
                  row.tolerance, row.pass ? "PASS" : "FAIL");
    os << line;
  }
  return os.str();
}

}  // namespace gaudp
