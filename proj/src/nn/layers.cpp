#include "uda/nn/layers.hpp"

#include <cmath>

namespace uda::nn {

namespace {

inline int ceil_div(int a, int b) { return a >= 0 ? (a + b - 1) / b : -((-a) / b); }
inline int floor_div(int a, int b) { return a >= 0 ? a / b : -((-a + b - 1) / b); }

// Valid output index range [lo, hi] such that o*stride + offset lands in [0, in_extent).
inline void valid_range(int offset, int stride, int in_extent, int out_extent, int& lo, int& hi) {
    lo = std::max(0, ceil_div(-offset, stride));
    hi = std::min(out_extent - 1, floor_div(in_extent - 1 - offset, stride));
}

}  // namespace

ConvParams::ConvParams(int in_c, int out_c, int k, int s, int p)
    : in_ch(in_c), out_ch(out_c), ksize(k), stride(s), pad(p),
      w(static_cast<std::size_t>(out_c) * in_c * k * k, 0.0), b(out_c, 0.0),
      gw(w.size(), 0.0), gb(out_c, 0.0) {}

void ConvParams::init_he(Rng& rng) {
    double sd = std::sqrt(2.0 / (static_cast<double>(in_ch) * ksize * ksize));
    for (auto& v : w) v = normal(rng, 0.0, sd);
    std::fill(b.begin(), b.end(), 0.0);
}

void ConvParams::zero_grad() {
    std::fill(gw.begin(), gw.end(), 0.0);
    std::fill(gb.begin(), gb.end(), 0.0);
}

void ConvParams::collect(const std::string& prefix, std::vector<NamedParam>& out) {
    out.push_back({prefix + ".w", &w, &gw});
    out.push_back({prefix + ".b", &b, &gb});
}

Tensor conv_forward(const ConvParams& P, const Tensor& x) {
    if (x.c != P.in_ch) throw ConfigError("conv input channel mismatch");
    const int oh = P.out_extent(x.h), ow = P.out_extent(x.w);
    if (oh < 1 || ow < 1) throw ConfigError("conv input spatially too small");

    Tensor y(P.out_ch, oh, ow);
    for (int oc = 0; oc < P.out_ch; ++oc) {
        double* yp = y.channel(oc);
        double bias = P.b[oc];
        for (int i = 0; i < oh * ow; ++i) yp[i] = bias;

        for (int ic = 0; ic < P.in_ch; ++ic) {
            const double* xp = x.channel(ic);
            const double* wk = &P.w[((static_cast<std::size_t>(oc) * P.in_ch) + ic) * P.ksize * P.ksize];
            for (int ky = 0; ky < P.ksize; ++ky) {
                int dy = ky - P.pad;
                int oy_lo, oy_hi;
                valid_range(dy, P.stride, x.h, oh, oy_lo, oy_hi);
                for (int kx = 0; kx < P.ksize; ++kx) {
                    double wv = wk[ky * P.ksize + kx];
                    int dx = kx - P.pad;
                    int ox_lo, ox_hi;
                    valid_range(dx, P.stride, x.w, ow, ox_lo, ox_hi);
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        double* yrow = yp + oy * ow;
                        const double* xrow = xp + (oy * P.stride + dy) * x.w + dx;
                        if (P.stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) yrow[ox] += wv * xrow[ox];
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) yrow[ox] += wv * xrow[ox * P.stride];
                        }
                    }
                }
            }
        }
    }
    return y;
}

Tensor conv_backward(ConvParams& P, const Tensor& x, const Tensor& gy, bool accumulate) {
    const int oh = P.out_extent(x.h), ow = P.out_extent(x.w);
    if (gy.c != P.out_ch || gy.h != oh || gy.w != ow)
        throw UsageError("conv_backward: upstream gradient shape mismatch");

    Tensor gx(x.c, x.h, x.w);
    for (int oc = 0; oc < P.out_ch; ++oc) {
        const double* gyp = gy.channel(oc);
        if (accumulate) {
            double s = 0.0;
            for (int i = 0; i < oh * ow; ++i) s += gyp[i];
            P.gb[oc] += s;
        }
        for (int ic = 0; ic < P.in_ch; ++ic) {
            const double* xp = x.channel(ic);
            double* gxp = gx.channel(ic);
            std::size_t wbase = ((static_cast<std::size_t>(oc) * P.in_ch) + ic) * P.ksize * P.ksize;
            for (int ky = 0; ky < P.ksize; ++ky) {
                int dy = ky - P.pad;
                int oy_lo, oy_hi;
                valid_range(dy, P.stride, x.h, oh, oy_lo, oy_hi);
                for (int kx = 0; kx < P.ksize; ++kx) {
                    int dx = kx - P.pad;
                    int ox_lo, ox_hi;
                    valid_range(dx, P.stride, x.w, ow, ox_lo, ox_hi);
                    double wv = P.w[wbase + ky * P.ksize + kx];
                    double wgrad = 0.0;
                    for (int oy = oy_lo; oy <= oy_hi; ++oy) {
                        const double* gyrow = gyp + oy * ow;
                        const double* xrow = xp + (oy * P.stride + dy) * x.w + dx;
                        double* gxrow = gxp + (oy * P.stride + dy) * x.w + dx;
                        if (P.stride == 1) {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                wgrad += gyrow[ox] * xrow[ox];
                                gxrow[ox] += wv * gyrow[ox];
                            }
                        } else {
                            for (int ox = ox_lo; ox <= ox_hi; ++ox) {
                                wgrad += gyrow[ox] * xrow[ox * P.stride];
                                gxrow[ox * P.stride] += wv * gyrow[ox];
                            }
                        }
                    }
                    if (accumulate) P.gw[wbase + ky * P.ksize + kx] += wgrad;
                }
            }
        }
    }
    return gx;
}

Tensor relu_forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : 0.0;
    return y;
}

Tensor relu_backward(const Tensor& pre, const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
        if (pre.data[i] <= 0.0) gx.data[i] = 0.0;
    return gx;
}

Tensor leaky_relu_forward(const Tensor& x, double slope) {
    Tensor y = x;
    for (auto& v : y.data) v = v > 0.0 ? v : slope * v;
    return y;
}

Tensor leaky_relu_backward(const Tensor& pre, const Tensor& gy, double slope) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i)
        if (pre.data[i] <= 0.0) gx.data[i] *= slope;
    return gx;
}

Tensor sigmoid_forward(const Tensor& x) {
    Tensor y = x;
    for (auto& v : y.data) v = 1.0 / (1.0 + std::exp(-v));
    return y;
}

Tensor sigmoid_backward(const Tensor& y, const Tensor& gy) {
    Tensor gx = gy;
    for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] *= y.data[i] * (1.0 - y.data[i]);
    return gx;
}

Tensor softmax_channels_forward(const Tensor& z) {
    Tensor p(z.c, z.h, z.w);
    const int plane = z.plane();
    for (int i = 0; i < plane; ++i) {
        double mx = z.data[i];
        for (int c = 1; c < z.c; ++c) mx = std::max(mx, z.data[static_cast<std::size_t>(c) * plane + i]);
        double sum = 0.0;
        for (int c = 0; c < z.c; ++c) {
            double e = std::exp(z.data[static_cast<std::size_t>(c) * plane + i] - mx);
            p.data[static_cast<std::size_t>(c) * plane + i] = e;
            sum += e;
        }
        for (int c = 0; c < z.c; ++c) p.data[static_cast<std::size_t>(c) * plane + i] /= sum;
    }
    return p;
}

Tensor softmax_channels_backward(const Tensor& p, const Tensor& gp) {
    Tensor gz(p.c, p.h, p.w);
    const int plane = p.plane();
    for (int i = 0; i < plane; ++i) {
        double dot = 0.0;
        for (int c = 0; c < p.c; ++c) {
            std::size_t idx = static_cast<std::size_t>(c) * plane + i;
            dot += gp.data[idx] * p.data[idx];
        }
        for (int c = 0; c < p.c; ++c) {
            std::size_t idx = static_cast<std::size_t>(c) * plane + i;
            gz.data[idx] = p.data[idx] * (gp.data[idx] - dot);
        }
    }
    return gz;
}

Tensor upsample_nearest_forward(const Tensor& x, int factor, int out_h, int out_w) {
    if (out_h > x.h * factor || out_w > x.w * factor)
        throw UsageError("upsample target larger than factor allows");
    Tensor y(x.c, out_h, out_w);
    for (int c = 0; c < x.c; ++c) {
        const double* xp = x.channel(c);
        double* yp = y.channel(c);
        for (int oy = 0; oy < out_h; ++oy) {
            const double* xrow = xp + (oy / factor) * x.w;
            double* yrow = yp + oy * out_w;
            for (int ox = 0; ox < out_w; ++ox) yrow[ox] = xrow[ox / factor];
        }
    }
    return y;
}

Tensor upsample_nearest_backward(const Tensor& gy, int factor, int in_h, int in_w) {
    Tensor gx(gy.c, in_h, in_w);
    for (int c = 0; c < gy.c; ++c) {
        const double* gyp = gy.channel(c);
        double* gxp = gx.channel(c);
        for (int oy = 0; oy < gy.h; ++oy) {
            double* gxrow = gxp + (oy / factor) * in_w;
            const double* gyrow = gyp + oy * gy.w;
            for (int ox = 0; ox < gy.w; ++ox) gxrow[ox / factor] += gyrow[ox];
        }
    }
    return gx;
}

}  // namespace uda::nn
