// Copyright 2026 The RepBNN Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "repbnn/network.h"

#include <algorithm>
#include <cmath>
#include <random>
#include <thread>

#include "repbnn/conv.h"
#include "repbnn/error.h"

namespace repbnn {

namespace {

float sign_of(float v) { return v >= 0.0F ? 1.0F : -1.0F; }

const std::vector<float>& value_of(const ParamStore& params, const std::string& id,
                                   std::string_view name) {
  auto it = params.find(param_key(id, name));
  if (it == params.end()) {
    throw Error(ErrorCode::kValidationError,
                "missing parameter " + param_key(id, name));
  }
  return it->second.value;
}

std::vector<float> conv_weights(const ParamStore& params, const Node& n) {
  std::vector<float> w = value_of(params, n.id, "weight");
  if (is_binary_conv_kind(n.kind)) {
    for (float& v : w) v = sign_of(v);
  }
  return w;
}

// Output window geometry shared by conv forward and backward.
struct ConvGeometry {
  ConvSpec spec;
  Dims in;
  Dims out;

  std::ptrdiff_t in_y(std::size_t oy, std::size_t ky) const {
    return static_cast<std::ptrdiff_t>(oy * spec.stride + ky) -
           static_cast<std::ptrdiff_t>(spec.padding);
  }
  std::ptrdiff_t in_x(std::size_t ox, std::size_t kx) const {
    return static_cast<std::ptrdiff_t>(ox * spec.stride + kx) -
           static_cast<std::ptrdiff_t>(spec.padding);
  }
  bool valid_y(std::ptrdiff_t iy) const {
    return iy >= 0 && iy < static_cast<std::ptrdiff_t>(in.h);
  }
  bool valid_x(std::ptrdiff_t ix) const {
    return ix >= 0 && ix < static_cast<std::ptrdiff_t>(in.w);
  }
  std::size_t w_index(std::size_t o, std::size_t c, std::size_t ky,
                      std::size_t kx) const {
    return ((o * spec.c_in + c) * spec.kh + ky) * spec.kw + kx;
  }
};

void conv_forward(const ConvGeometry& g, const float* x, const float* w, float* y,
                  std::size_t threads) {
  const Dims& in = g.in;
  const Dims& out = g.out;
  parallel_for(out.n * out.c, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t n = job / out.c;
      const std::size_t o = job % out.c;
      float* yp = y + job * out.plane();
      std::fill(yp, yp + out.plane(), 0.0F);
      for (std::size_t c = 0; c < in.c; ++c) {
        const float* xp = x + (n * in.c + c) * in.plane();
        for (std::size_t ky = 0; ky < g.spec.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.spec.kw; ++kx) {
            const float wv = w[g.w_index(o, c, ky, kx)];
            for (std::size_t oy = 0; oy < out.h; ++oy) {
              const auto iy = g.in_y(oy, ky);
              if (!g.valid_y(iy)) continue;
              for (std::size_t ox = 0; ox < out.w; ++ox) {
                const auto ix = g.in_x(ox, kx);
                if (!g.valid_x(ix)) continue;
                yp[oy * out.w + ox] += wv * xp[iy * in.w + ix];
              }
            }
          }
        }
      }
    }
  });
}

void conv_backward(const ConvGeometry& g, const float* x, const float* w,
                   const float* dy, float* dx, float* dw, std::size_t threads) {
  const Dims& in = g.in;
  const Dims& out = g.out;
  parallel_for(out.c, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t o = begin; o < end; ++o) {
      for (std::size_t c = 0; c < in.c; ++c) {
        for (std::size_t ky = 0; ky < g.spec.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.spec.kw; ++kx) {
            float acc = 0.0F;
            for (std::size_t n = 0; n < out.n; ++n) {
              const float* dyp = dy + (n * out.c + o) * out.plane();
              const float* xp = x + (n * in.c + c) * in.plane();
              for (std::size_t oy = 0; oy < out.h; ++oy) {
                const auto iy = g.in_y(oy, ky);
                if (!g.valid_y(iy)) continue;
                for (std::size_t ox = 0; ox < out.w; ++ox) {
                  const auto ix = g.in_x(ox, kx);
                  if (!g.valid_x(ix)) continue;
                  acc += dyp[oy * out.w + ox] * xp[iy * in.w + ix];
                }
              }
            }
            dw[g.w_index(o, c, ky, kx)] = acc;
          }
        }
      }
    }
  });
  parallel_for(in.n * in.c, threads, [&](std::size_t begin, std::size_t end) {
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t n = job / in.c;
      const std::size_t c = job % in.c;
      float* dxp = dx + job * in.plane();
      for (std::size_t o = 0; o < out.c; ++o) {
        const float* dyp = dy + (n * out.c + o) * out.plane();
        for (std::size_t ky = 0; ky < g.spec.kh; ++ky) {
          for (std::size_t kx = 0; kx < g.spec.kw; ++kx) {
            const float wv = w[g.w_index(o, c, ky, kx)];
            for (std::size_t oy = 0; oy < out.h; ++oy) {
              const auto iy = g.in_y(oy, ky);
              if (!g.valid_y(iy)) continue;
              for (std::size_t ox = 0; ox < out.w; ++ox) {
                const auto ix = g.in_x(ox, kx);
                if (!g.valid_x(ix)) continue;
                dxp[iy * in.w + ix] += wv * dyp[oy * out.w + ox];
              }
            }
          }
        }
      }
    }
  });
}

Activation zeros_like(const Dims& d) { return {d, std::vector<float>(d.numel(), 0.0F)}; }

}  // namespace

std::string param_key(std::string_view node_id, std::string_view name) {
  std::string key(node_id);
  key.push_back('.');
  key.append(name);
  return key;
}

void parallel_for(std::size_t count, std::size_t threads,
                  const std::function<void(std::size_t, std::size_t)>& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, count));
  if (threads == 1) {
    fn(0, count);
    return;
  }
  std::vector<std::jthread> workers;
  const std::size_t chunk = (count + threads - 1) / threads;
  for (std::size_t begin = 0; begin < count; begin += chunk) {
    workers.emplace_back(fn, begin, std::min(count, begin + chunk));
  }
}

ParamStore init_params(const Graph& g, std::uint64_t seed, float bn_init_noise) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<float> normal(0.0F, 1.0F);
  ParamStore params;
  auto add = [&](const std::string& id, std::string_view name, Dims dims,
                 std::vector<float> value, bool trainable = true) {
    params.emplace(param_key(id, name), Param{dims, std::move(value), trainable});
  };
  for (const Node& n : g.nodes()) {
    switch (n.kind) {
      case NodeKind::kConv:
      case NodeKind::kBconv:
      case NodeKind::kRepConv:
      case NodeKind::kRepBconv: {
        const ConvSpec ps = physical_spec(n.conv());
        const Dims d = ps.kernel_dims();
        const float scale = std::sqrt(2.0F / static_cast<float>(ps.c_in * ps.kh * ps.kw));
        std::vector<float> w(d.numel());
        for (float& v : w) v = scale * normal(rng);
        add(n.id, "weight", d, std::move(w));
        break;
      }
      case NodeKind::kBatchNorm: {
        const std::size_t c = n.as<BatchNormAttrs>().channels;
        std::vector<float> gamma(c, 1.0F);
        if (bn_init_noise != 0.0F) {
          for (float& v : gamma) v += bn_init_noise * normal(rng);
        }
        const Dims d{1, c, 1, 1};
        add(n.id, "gamma", d, std::move(gamma));
        add(n.id, "beta", d, std::vector<float>(c, 0.0F));
        add(n.id, "running_mean", d, std::vector<float>(c, 0.0F), false);
        add(n.id, "running_var", d, std::vector<float>(c, 1.0F), false);
        break;
      }
      case NodeKind::kPReLUShifted: {
        const std::size_t c = n.as<ChannelAttrs>().channels;
        const Dims d{1, c, 1, 1};
        add(n.id, "shift_in", d, std::vector<float>(c, 0.0F));
        add(n.id, "slope", d, std::vector<float>(c, 0.25F));
        add(n.id, "shift_out", d, std::vector<float>(c, 0.0F));
        break;
      }
      case NodeKind::kFC: {
        const auto& a = n.as<FCAttrs>();
        const Dims d{a.out_features, a.take, 1, 1};
        const float scale = std::sqrt(1.0F / static_cast<float>(a.take));
        std::vector<float> w(d.numel());
        for (float& v : w) v = scale * normal(rng);
        add(n.id, "weight", d, std::move(w));
        add(n.id, "bias", {1, a.out_features, 1, 1},
            std::vector<float>(a.out_features, 0.0F));
        break;
      }
      default:
        break;
    }
  }
  return params;
}

Network::Network(Graph graph) : graph_(std::move(graph)) {
  validate(graph_);
  std::unordered_map<const Node*, std::size_t> index;
  for (std::size_t i = 0; i < graph_.nodes().size(); ++i) index[&graph_.nodes()[i]] = i;
  for (const Node* n : graph_.topo_order()) order_.push_back(index.at(n));
}

const Activation& Network::activation(std::string_view id) const {
  auto it = acts_.find(std::string(id));
  if (it == acts_.end()) {
    throw Error(ErrorCode::kUnknownLayer, "no activation for '" + std::string(id) + "'");
  }
  return it->second;
}

const Activation& Network::output() const { return activation(graph_.output_id()); }

const Activation& Network::forward(const ParamStore& params, const Activation& input,
                                   bool train, std::size_t threads) {
  const ShapeMap shapes = infer_shapes(graph_, input.dims);
  acts_.clear();
  stats_.clear();
  bn_cache_.clear();
  argmax_.clear();
  trained_forward_ = train;

  for (std::size_t idx : order_) {
    const Node& n = graph_.nodes()[idx];
    const Dims od = shapes.at(n.id);
    Activation y = zeros_like(od);
    auto in = [&](std::size_t i) -> const Activation& { return acts_.at(n.inputs[i]); };

    switch (n.kind) {
      case NodeKind::kInput:
        y.data = input.data;
        break;
      case NodeKind::kConv:
      case NodeKind::kBconv:
      case NodeKind::kRepConv:
      case NodeKind::kRepBconv: {
        const ConvGeometry geo{physical_spec(n.conv()), in(0).dims, od};
        const std::vector<float> w = conv_weights(params, n);
        conv_forward(geo, in(0).data.data(), w.data(), y.data.data(), threads);
        break;
      }
      case NodeKind::kBatchNorm: {
        const Activation& x = in(0);
        const std::size_t c_count = od.c;
        const std::size_t plane = od.plane();
        const auto& gamma = value_of(params, n.id, "gamma");
        const auto& shift = value_of(params, n.id, "beta");
        BatchStats st{std::vector<float>(c_count), std::vector<float>(c_count)};
        if (train) {
          const double m = static_cast<double>(od.n * plane);
          for (std::size_t c = 0; c < c_count; ++c) {
            double sum = 0.0;
            for (std::size_t b = 0; b < od.n; ++b) {
              const float* p = &x.data[(b * c_count + c) * plane];
              for (std::size_t i = 0; i < plane; ++i) sum += p[i];
            }
            const double mean = sum / m;
            double sq = 0.0;
            for (std::size_t b = 0; b < od.n; ++b) {
              const float* p = &x.data[(b * c_count + c) * plane];
              for (std::size_t i = 0; i < plane; ++i) sq += (p[i] - mean) * (p[i] - mean);
            }
            st.mean[c] = static_cast<float>(mean);
            st.var[c] = static_cast<float>(sq / m);
          }
        } else {
          st.mean = value_of(params, n.id, "running_mean");
          st.var = value_of(params, n.id, "running_var");
        }
        BnCache cache{std::vector<float>(od.numel()), std::vector<float>(c_count)};
        for (std::size_t c = 0; c < c_count; ++c) {
          cache.inv_std[c] = 1.0F / std::sqrt(st.var[c] + kBnEpsilon);
        }
        for (std::size_t b = 0; b < od.n; ++b) {
          for (std::size_t c = 0; c < c_count; ++c) {
            const std::size_t base = (b * c_count + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              const float xhat = (x.data[base + i] - st.mean[c]) * cache.inv_std[c];
              cache.xhat[base + i] = xhat;
              y.data[base + i] = gamma[c] * xhat + shift[c];
            }
          }
        }
        if (train) {
          stats_.emplace(n.id, std::move(st));
          bn_cache_.emplace(n.id, std::move(cache));
        }
        break;
      }
      case NodeKind::kSign:
        for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] = sign_of(in(0).data[i]);
        break;
      case NodeKind::kReLU:
        for (std::size_t i = 0; i < y.data.size(); ++i) {
          y.data[i] = std::max(0.0F, in(0).data[i]);
        }
        break;
      case NodeKind::kPReLUShifted: {
        const auto& sin = value_of(params, n.id, "shift_in");
        const auto& slope = value_of(params, n.id, "slope");
        const auto& sout = value_of(params, n.id, "shift_out");
        for (std::size_t i = 0; i < y.data.size(); ++i) {
          const std::size_t c = (i / od.plane()) % od.c;
          const float z = in(0).data[i] - sin[c];
          y.data[i] = (z > 0.0F ? z : slope[c] * z) + sout[c];
        }
        break;
      }
      case NodeKind::kAdd:
        for (std::size_t k = 0; k < n.inputs.size(); ++k) {
          const auto& src = in(k).data;
          for (std::size_t i = 0; i < y.data.size(); ++i) y.data[i] += src[i];
        }
        break;
      case NodeKind::kAvgPool:
      case NodeKind::kMaxPool: {
        const Activation& x = in(0);
        const auto& p = n.as<PoolAttrs>();
        const std::size_t k = p.global ? x.dims.h : p.kernel;
        const std::size_t kx_n = p.global ? x.dims.w : p.kernel;
        const std::size_t s = p.global ? 1 : p.stride;
        const bool is_max = n.kind == NodeKind::kMaxPool;
        std::vector<std::size_t> arg(is_max ? od.numel() : 0);
        for (std::size_t bc = 0; bc < od.n * od.c; ++bc) {
          const float* xp = &x.data[bc * x.dims.plane()];
          for (std::size_t oy = 0; oy < od.h; ++oy) {
            for (std::size_t ox = 0; ox < od.w; ++ox) {
              float acc = is_max ? -INFINITY : 0.0F;
              std::size_t best = 0;
              for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < kx_n; ++kx) {
                  const std::size_t at = (oy * s + ky) * x.dims.w + ox * s + kx;
                  if (is_max) {
                    if (xp[at] > acc) {
                      acc = xp[at];
                      best = at;
                    }
                  } else {
                    acc += xp[at];
                  }
                }
              }
              const std::size_t o = bc * od.plane() + oy * od.w + ox;
              if (is_max) {
                y.data[o] = acc;
                arg[o] = bc * x.dims.plane() + best;
              } else {
                y.data[o] = acc / static_cast<float>(k * kx_n);
              }
            }
          }
        }
        if (is_max) argmax_[n.id] = std::move(arg);
        break;
      }
      case NodeKind::kRepeat: {
        const Activation& x = in(0);
        const std::size_t block = x.dims.sample_size();
        const std::size_t times = n.as<RepeatAttrs>().times;
        for (std::size_t b = 0; b < od.n; ++b) {
          for (std::size_t t = 0; t < times; ++t) {
            std::copy_n(&x.data[b * block], block, &y.data[(b * times + t) * block]);
          }
        }
        break;
      }
      case NodeKind::kFlatten:
        y.data = in(0).data;
        break;
      case NodeKind::kFC: {
        const Activation& x = in(0);
        const auto& a = n.as<FCAttrs>();
        const auto& w = value_of(params, n.id, "weight");
        const auto& bias = value_of(params, n.id, "bias");
        for (std::size_t b = 0; b < od.n; ++b) {
          const float* xp = &x.data[b * a.in_features];
          for (std::size_t o = 0; o < a.out_features; ++o) {
            float acc = bias[o];
            for (std::size_t i = 0; i < a.take; ++i) acc += w[o * a.take + i] * xp[i];
            y.data[b * a.out_features + o] = acc;
          }
        }
        break;
      }
      case NodeKind::kChannelPad: {
        const Activation& x = in(0);
        const auto& a = n.as<ChannelPadAttrs>();
        const std::size_t plane = od.plane();
        for (std::size_t b = 0; b < od.n; ++b) {
          std::copy_n(&x.data[b * x.dims.sample_size()], x.dims.sample_size(),
                      &y.data[(b * od.c + a.before) * plane]);
        }
        break;
      }
    }
    acts_.emplace(n.id, std::move(y));
  }
  return output();
}

GradStore Network::backward(const ParamStore& params, const Activation& grad_output,
                            std::size_t threads, Activation* input_grad) const {
  if (!trained_forward_) {
    throw Error(ErrorCode::kInvalidArgument, "backward requires a training forward pass");
  }
  GradStore grads;
  std::unordered_map<std::string, Activation> dacts;
  auto dgrad = [&](const std::string& id) -> Activation& {
    auto it = dacts.find(id);
    if (it == dacts.end()) it = dacts.emplace(id, zeros_like(acts_.at(id).dims)).first;
    return it->second;
  };
  dgrad(graph_.output_id()).data = grad_output.data;

  for (auto it = order_.rbegin(); it != order_.rend(); ++it) {
    const Node& n = graph_.nodes()[*it];
    auto found = dacts.find(n.id);
    if (found == dacts.end()) continue;
    const Activation dy = std::move(found->second);
    dacts.erase(found);
    const Dims& od = dy.dims;

    switch (n.kind) {
      case NodeKind::kInput:
        if (input_grad != nullptr) *input_grad = dy;
        break;
      case NodeKind::kConv:
      case NodeKind::kBconv:
      case NodeKind::kRepConv:
      case NodeKind::kRepBconv: {
        const Activation& x = acts_.at(n.inputs[0]);
        const ConvGeometry geo{physical_spec(n.conv()), x.dims, od};
        const std::vector<float> w = conv_weights(params, n);
        std::vector<float> dw(w.size(), 0.0F);
        Activation& dx = dgrad(n.inputs[0]);
        conv_backward(geo, x.data.data(), w.data(), dy.data.data(), dx.data.data(),
                      dw.data(), threads);
        if (is_binary_conv_kind(n.kind)) {
          const auto& latent = value_of(params, n.id, "weight");
          for (std::size_t i = 0; i < dw.size(); ++i) {
            if (std::fabs(latent[i]) > 1.0F) dw[i] = 0.0F;
          }
        }
        grads[param_key(n.id, "weight")] = std::move(dw);
        break;
      }
      case NodeKind::kBatchNorm: {
        const BnCache& cache = bn_cache_.at(n.id);
        const auto& gamma = value_of(params, n.id, "gamma");
        const std::size_t plane = od.plane();
        const double m = static_cast<double>(od.n * plane);
        std::vector<float> dgamma(od.c, 0.0F);
        std::vector<float> dbeta(od.c, 0.0F);
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t c = 0; c < od.c; ++c) {
          double sum_dy = 0.0;
          double sum_dy_xhat = 0.0;
          for (std::size_t b = 0; b < od.n; ++b) {
            const std::size_t base = (b * od.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              sum_dy += dy.data[base + i];
              sum_dy_xhat += dy.data[base + i] * cache.xhat[base + i];
            }
          }
          dgamma[c] = static_cast<float>(sum_dy_xhat);
          dbeta[c] = static_cast<float>(sum_dy);
          const double k = gamma[c] * cache.inv_std[c] / m;
          for (std::size_t b = 0; b < od.n; ++b) {
            const std::size_t base = (b * od.c + c) * plane;
            for (std::size_t i = 0; i < plane; ++i) {
              dx.data[base + i] += static_cast<float>(
                  k * (m * dy.data[base + i] - sum_dy - cache.xhat[base + i] * sum_dy_xhat));
            }
          }
        }
        grads[param_key(n.id, "gamma")] = std::move(dgamma);
        grads[param_key(n.id, "beta")] = std::move(dbeta);
        break;
      }
      case NodeKind::kSign: {
        const auto& x = acts_.at(n.inputs[0]).data;
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (std::fabs(x[i]) <= 1.0F) dx.data[i] += dy.data[i];
        }
        break;
      }
      case NodeKind::kReLU: {
        const auto& x = acts_.at(n.inputs[0]).data;
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t i = 0; i < x.size(); ++i) {
          if (x[i] > 0.0F) dx.data[i] += dy.data[i];
        }
        break;
      }
      case NodeKind::kPReLUShifted: {
        const auto& x = acts_.at(n.inputs[0]).data;
        const auto& sin = value_of(params, n.id, "shift_in");
        const auto& slope = value_of(params, n.id, "slope");
        std::vector<float> dsin(od.c, 0.0F);
        std::vector<float> dslope(od.c, 0.0F);
        std::vector<float> dsout(od.c, 0.0F);
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t i = 0; i < x.size(); ++i) {
          const std::size_t c = (i / od.plane()) % od.c;
          const float z = x[i] - sin[c];
          const float g = dy.data[i];
          dsout[c] += g;
          const float dz = z > 0.0F ? g : slope[c] * g;
          if (z <= 0.0F) dslope[c] += g * z;
          dx.data[i] += dz;
          dsin[c] -= dz;
        }
        grads[param_key(n.id, "shift_in")] = std::move(dsin);
        grads[param_key(n.id, "slope")] = std::move(dslope);
        grads[param_key(n.id, "shift_out")] = std::move(dsout);
        break;
      }
      case NodeKind::kAdd:
        for (const auto& src : n.inputs) {
          Activation& dx = dgrad(src);
          for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += dy.data[i];
        }
        break;
      case NodeKind::kAvgPool: {
        const Dims& xd = acts_.at(n.inputs[0]).dims;
        const auto& p = n.as<PoolAttrs>();
        const std::size_t k = p.global ? xd.h : p.kernel;
        const std::size_t kx_n = p.global ? xd.w : p.kernel;
        const std::size_t s = p.global ? 1 : p.stride;
        const float inv = 1.0F / static_cast<float>(k * kx_n);
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t bc = 0; bc < od.n * od.c; ++bc) {
          float* dxp = &dx.data[bc * xd.plane()];
          for (std::size_t oy = 0; oy < od.h; ++oy) {
            for (std::size_t ox = 0; ox < od.w; ++ox) {
              const float g = dy.data[bc * od.plane() + oy * od.w + ox] * inv;
              for (std::size_t ky = 0; ky < k; ++ky) {
                for (std::size_t kx = 0; kx < kx_n; ++kx) {
                  dxp[(oy * s + ky) * xd.w + ox * s + kx] += g;
                }
              }
            }
          }
        }
        break;
      }
      case NodeKind::kMaxPool: {
        const auto& arg = argmax_.at(n.id);
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t i = 0; i < arg.size(); ++i) dx.data[arg[i]] += dy.data[i];
        break;
      }
      case NodeKind::kRepeat: {
        Activation& dx = dgrad(n.inputs[0]);
        const std::size_t block = dx.dims.sample_size();
        const std::size_t times = n.as<RepeatAttrs>().times;
        for (std::size_t b = 0; b < od.n; ++b) {
          for (std::size_t t = 0; t < times; ++t) {
            const float* src = &dy.data[(b * times + t) * block];
            float* dst = &dx.data[b * block];
            for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
          }
        }
        break;
      }
      case NodeKind::kFlatten: {
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[i] += dy.data[i];
        break;
      }
      case NodeKind::kFC: {
        const auto& x = acts_.at(n.inputs[0]).data;
        const auto& a = n.as<FCAttrs>();
        const auto& w = value_of(params, n.id, "weight");
        std::vector<float> dw(w.size(), 0.0F);
        std::vector<float> db(a.out_features, 0.0F);
        Activation& dx = dgrad(n.inputs[0]);
        for (std::size_t b = 0; b < od.n; ++b) {
          const float* xp = &x[b * a.in_features];
          float* dxp = &dx.data[b * a.in_features];
          for (std::size_t o = 0; o < a.out_features; ++o) {
            const float g = dy.data[b * a.out_features + o];
            db[o] += g;
            for (std::size_t i = 0; i < a.take; ++i) {
              dw[o * a.take + i] += g * xp[i];
              dxp[i] += g * w[o * a.take + i];
            }
          }
        }
        grads[param_key(n.id, "weight")] = std::move(dw);
        grads[param_key(n.id, "bias")] = std::move(db);
        break;
      }
      case NodeKind::kChannelPad: {
        const auto& a = n.as<ChannelPadAttrs>();
        Activation& dx = dgrad(n.inputs[0]);
        const std::size_t block = dx.dims.sample_size();
        for (std::size_t b = 0; b < od.n; ++b) {
          const float* src = &dy.data[(b * od.c + a.before) * od.plane()];
          float* dst = &dx.data[b * block];
          for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
        }
        break;
      }
    }
  }
  return grads;
}

}  // namespace repbnn
