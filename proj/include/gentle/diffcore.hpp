#pragma once

// Minimal reverse-mode differentiable MLP stack: fully-connected layers,
// tanh/ELU/ReLU activations, optional layer normalization after the first
// hidden layer, output heads (raw, tanh-bounded, Gaussian mean/variance,
// categorical logits) and an Adam optimizer. Everything is value-semantic
// and deterministic given (spec, seed, input).

#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace gentle {

enum class Activation { Tanh, Elu, Relu, Identity };
enum class OutputHead { Raw, TanhBounded, GaussianMeanVar, CategoricalLogits };

inline const char* to_string(Activation a) {
    switch (a) {
        case Activation::Tanh: return "tanh";
        case Activation::Elu: return "elu";
        case Activation::Relu: return "relu";
        default: return "identity";
    }
}

inline const char* to_string(OutputHead h) {
    switch (h) {
        case OutputHead::Raw: return "raw";
        case OutputHead::TanhBounded: return "tanh_bounded";
        case OutputHead::GaussianMeanVar: return "gaussian_mean_var";
        default: return "categorical_logits";
    }
}

constexpr double kVarianceFloor = 1e-6;
constexpr double kLayerNormEps = 1e-10;

// layer_widths = [input, hidden..., output]. hidden_activations has one
// entry per hidden layer. With the GaussianMeanVar head the final affine
// layer emits 2 values per output dimension (mean, raw variance).
struct NetworkSpec {
    std::vector<int> layer_widths;
    std::vector<Activation> hidden_activations;
    bool layer_norm_after_first = false;
    OutputHead output_head = OutputHead::Raw;

    int num_affine_layers() const { return static_cast<int>(layer_widths.size()) - 1; }
    int input_dim() const { return layer_widths.front(); }
    // Logical output dimension (per-head contract).
    int output_dim() const {
        int w = layer_widths.back();
        return output_head == OutputHead::GaussianMeanVar ? 2 * w : w;
    }
    // Width actually emitted by the last affine layer.
    int affine_out(int layer) const {
        int w = layer_widths[layer + 1];
        if (layer == num_affine_layers() - 1 && output_head == OutputHead::GaussianMeanVar)
            return 2 * w;
        return w;
    }
    int affine_in(int layer) const { return layer_widths[layer]; }

    void validate() const {
        if (layer_widths.size() < 3)
            throw std::invalid_argument("NetworkSpec: need at least one hidden layer");
        for (int w : layer_widths)
            if (w <= 0) throw std::invalid_argument("NetworkSpec: widths must be positive");
        if (hidden_activations.size() != layer_widths.size() - 2)
            throw std::invalid_argument("NetworkSpec: one activation per hidden layer");
    }

    std::size_t param_count() const {
        std::size_t n = 0;
        for (int l = 0; l < num_affine_layers(); ++l)
            n += static_cast<std::size_t>(affine_out(l)) * affine_in(l) + affine_out(l);
        if (layer_norm_after_first) n += 2 * static_cast<std::size_t>(layer_widths[1]);
        return n;
    }

    bool operator==(const NetworkSpec&) const = default;
};

// Convenience builder for the common "uniform hidden activation" case.
inline NetworkSpec make_mlp(std::vector<int> widths, Activation act, OutputHead head,
                            bool layer_norm = false) {
    NetworkSpec spec;
    spec.layer_widths = std::move(widths);
    spec.hidden_activations.assign(spec.layer_widths.size() - 2, act);
    spec.layer_norm_after_first = layer_norm;
    spec.output_head = head;
    spec.validate();
    return spec;
}

// Flat parameter vector. Layout: per affine layer, row-major W then b;
// if layer norm is enabled, gamma then beta for the first hidden layer
// appended at the end.
struct ParamSet {
    std::vector<double> values;
    std::uint32_t version = 1;

    double* layer_w(const NetworkSpec& s, int l) {
        return values.data() + w_offset(s, l);
    }
    const double* layer_w(const NetworkSpec& s, int l) const {
        return values.data() + w_offset(s, l);
    }
    double* layer_b(const NetworkSpec& s, int l) {
        return values.data() + w_offset(s, l) +
               static_cast<std::size_t>(s.affine_out(l)) * s.affine_in(l);
    }
    const double* layer_b(const NetworkSpec& s, int l) const {
        return values.data() + w_offset(s, l) +
               static_cast<std::size_t>(s.affine_out(l)) * s.affine_in(l);
    }
    double* ln_gamma(const NetworkSpec& s) { return values.data() + ln_offset(s); }
    const double* ln_gamma(const NetworkSpec& s) const { return values.data() + ln_offset(s); }
    double* ln_beta(const NetworkSpec& s) { return values.data() + ln_offset(s) + s.layer_widths[1]; }
    const double* ln_beta(const NetworkSpec& s) const {
        return values.data() + ln_offset(s) + s.layer_widths[1];
    }

    static std::size_t w_offset(const NetworkSpec& s, int layer) {
        std::size_t off = 0;
        for (int l = 0; l < layer; ++l)
            off += static_cast<std::size_t>(s.affine_out(l)) * s.affine_in(l) + s.affine_out(l);
        return off;
    }
    static std::size_t ln_offset(const NetworkSpec& s) {
        return w_offset(s, s.num_affine_layers());
    }
};

using GradSet = ParamSet;

inline ParamSet build_network(const NetworkSpec& spec, std::uint64_t seed) {
    spec.validate();
    ParamSet p;
    p.values.assign(spec.param_count(), 0.0);
    std::mt19937_64 rng(seed);
    for (int l = 0; l < spec.num_affine_layers(); ++l) {
        const double bound = 1.0 / std::sqrt(static_cast<double>(spec.affine_in(l)));
        std::uniform_real_distribution<double> dist(-bound, bound);
        double* w = p.layer_w(spec, l);
        const std::size_t n = static_cast<std::size_t>(spec.affine_out(l)) * spec.affine_in(l);
        for (std::size_t i = 0; i < n; ++i) w[i] = dist(rng);
        // biases stay zero
    }
    if (spec.layer_norm_after_first) {
        double* g = p.ln_gamma(spec);
        for (int i = 0; i < spec.layer_widths[1]; ++i) g[i] = 1.0;
        // beta stays zero
    }
    return p;
}

// Activation record for one forward pass.
struct Tape {
    std::vector<double> input;
    // per affine layer: pre-activation z (post-LN where applicable) and
    // post-activation h
    std::vector<std::vector<double>> pre;   // affine output before LN/activation
    std::vector<std::vector<double>> post;  // layer output fed to the next affine
    // layer norm intermediates (first hidden layer only)
    std::vector<double> ln_xhat;
    double ln_inv_std = 0.0;
    // head intermediates
    std::vector<double> head_out;
};

namespace detail {

inline double apply_act(Activation a, double z) {
    switch (a) {
        case Activation::Tanh: return std::tanh(z);
        case Activation::Elu: return z >= 0.0 ? z : std::expm1(z);
        case Activation::Relu: return z > 0.0 ? z : 0.0;
        default: return z;
    }
}

// derivative expressed via pre-activation z and activation output h
inline double act_grad(Activation a, double z, double h) {
    switch (a) {
        case Activation::Tanh: return 1.0 - h * h;
        case Activation::Elu: return z >= 0.0 ? 1.0 : h + 1.0;
        case Activation::Relu: return z > 0.0 ? 1.0 : 0.0;
        default: return 1.0;
    }
}

inline double softplus(double x) {
    return x > 30.0 ? x : std::log1p(std::exp(x));
}
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

}  // namespace detail

// Returns the head output; the tape records everything needed for an exact
// backward pass.
inline std::vector<double> forward(const ParamSet& params, const NetworkSpec& spec,
                                   const std::vector<double>& input, Tape& tape) {
    if (static_cast<int>(input.size()) != spec.input_dim())
        throw std::invalid_argument("forward: input dimension mismatch");
    for (double v : input)
        if (!std::isfinite(v)) throw std::invalid_argument("forward: non-finite input");

    const int L = spec.num_affine_layers();
    tape.input = input;
    tape.pre.assign(L, {});
    tape.post.assign(L, {});

    const std::vector<double>* x = &tape.input;
    for (int l = 0; l < L; ++l) {
        const int nin = spec.affine_in(l);
        const int nout = spec.affine_out(l);
        const double* w = params.layer_w(spec, l);
        const double* b = params.layer_b(spec, l);
        std::vector<double>& z = tape.pre[l];
        z.assign(b, b + nout);
        for (int o = 0; o < nout; ++o) {
            const double* row = w + static_cast<std::size_t>(o) * nin;
            double acc = 0.0;
            for (int i = 0; i < nin; ++i) acc += row[i] * (*x)[i];
            z[o] += acc;
        }
        if (l == L - 1) {
            tape.post[l] = z;  // head applied below
            break;
        }
        std::vector<double>& h = tape.post[l];
        h.resize(nout);
        if (l == 0 && spec.layer_norm_after_first) {
            double mean = 0.0;
            for (double v : z) mean += v;
            mean /= nout;
            double var = 0.0;
            for (double v : z) var += (v - mean) * (v - mean);
            var /= nout;
            tape.ln_inv_std = 1.0 / std::sqrt(var + kLayerNormEps);
            tape.ln_xhat.resize(nout);
            const double* g = params.ln_gamma(spec);
            const double* be = params.ln_beta(spec);
            for (int o = 0; o < nout; ++o) {
                tape.ln_xhat[o] = (z[o] - mean) * tape.ln_inv_std;
                double y = g[o] * tape.ln_xhat[o] + be[o];
                h[o] = detail::apply_act(spec.hidden_activations[l], y);
                z[o] = y;  // store post-LN pre-activation for backward
            }
        } else {
            for (int o = 0; o < nout; ++o)
                h[o] = detail::apply_act(spec.hidden_activations[l], z[o]);
        }
        x = &h;
    }

    // head
    const std::vector<double>& z = tape.pre[L - 1];
    std::vector<double>& out = tape.head_out;
    switch (spec.output_head) {
        case OutputHead::Raw:
        case OutputHead::CategoricalLogits:
            out = z;
            break;
        case OutputHead::TanhBounded:
            out.resize(z.size());
            for (std::size_t i = 0; i < z.size(); ++i) out[i] = std::tanh(z[i]);
            break;
        case OutputHead::GaussianMeanVar: {
            const int d = spec.layer_widths.back();
            out.resize(2 * d);
            for (int i = 0; i < d; ++i) out[i] = z[i];
            for (int i = 0; i < d; ++i) out[d + i] = detail::softplus(z[d + i]) + kVarianceFloor;
            break;
        }
    }
    return out;
}

inline std::vector<double> forward(const ParamSet& params, const NetworkSpec& spec,
                                   const std::vector<double>& input) {
    Tape tape;
    return forward(params, spec, input, tape);
}

// Accumulates d(output . output_grad)/dparams into grads (which must be
// shape-congruent and may carry prior accumulation). Returns the gradient
// with respect to the network input.
inline std::vector<double> backward_accumulate(const ParamSet& params, const NetworkSpec& spec,
                                               const Tape& tape,
                                               const std::vector<double>& output_grad,
                                               GradSet& grads) {
    if (static_cast<int>(output_grad.size()) != spec.output_dim())
        throw std::invalid_argument("backward: output_grad dimension mismatch");
    if (grads.values.size() != spec.param_count())
        throw std::invalid_argument("backward: grad shape mismatch");
    const int L = spec.num_affine_layers();
    if (static_cast<int>(tape.pre.size()) != L)
        throw std::invalid_argument("backward: tape/spec mismatch");

    // head backward -> gradient wrt last affine output
    std::vector<double> dz;
    const std::vector<double>& zlast = tape.pre[L - 1];
    switch (spec.output_head) {
        case OutputHead::Raw:
        case OutputHead::CategoricalLogits:
            dz = output_grad;
            break;
        case OutputHead::TanhBounded: {
            dz.resize(zlast.size());
            for (std::size_t i = 0; i < zlast.size(); ++i) {
                const double y = tape.head_out[i];
                dz[i] = output_grad[i] * (1.0 - y * y);
            }
            break;
        }
        case OutputHead::GaussianMeanVar: {
            const int d = spec.layer_widths.back();
            dz.resize(2 * d);
            for (int i = 0; i < d; ++i) dz[i] = output_grad[i];
            for (int i = 0; i < d; ++i)
                dz[d + i] = output_grad[d + i] * detail::sigmoid(zlast[d + i]);
            break;
        }
    }

    for (int l = L - 1; l >= 0; --l) {
        const int nin = spec.affine_in(l);
        const int nout = spec.affine_out(l);
        const double* w = params.layer_w(spec, l);
        const std::vector<double>& x = (l == 0) ? tape.input : tape.post[l - 1];
        double* gw = grads.layer_w(spec, l);
        double* gb = grads.layer_b(spec, l);

        // chain through the activation (hidden layers only)
        std::vector<double> delta = dz;
        if (l < L - 1) {
            for (int o = 0; o < nout; ++o)
                delta[o] *= detail::act_grad(spec.hidden_activations[l], tape.pre[l][o],
                                             tape.post[l][o]);
            if (l == 0 && spec.layer_norm_after_first) {
                // delta currently wrt y = gamma*xhat + beta
                const double* g = params.ln_gamma(spec);
                double* gg = grads.ln_gamma(spec);
                double* gbeta = grads.ln_beta(spec);
                std::vector<double> dxhat(nout);
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int o = 0; o < nout; ++o) {
                    gg[o] += delta[o] * tape.ln_xhat[o];
                    gbeta[o] += delta[o];
                    dxhat[o] = delta[o] * g[o];
                    mean_dxhat += dxhat[o];
                    mean_dxhat_xhat += dxhat[o] * tape.ln_xhat[o];
                }
                mean_dxhat /= nout;
                mean_dxhat_xhat /= nout;
                for (int o = 0; o < nout; ++o)
                    delta[o] = tape.ln_inv_std *
                               (dxhat[o] - mean_dxhat - tape.ln_xhat[o] * mean_dxhat_xhat);
            }
        }

        std::vector<double> dx(nin, 0.0);
        for (int o = 0; o < nout; ++o) {
            const double d = delta[o];
            gb[o] += d;
            double* gwrow = gw + static_cast<std::size_t>(o) * nin;
            const double* wrow = w + static_cast<std::size_t>(o) * nin;
            for (int i = 0; i < nin; ++i) {
                gwrow[i] += d * x[i];
                dx[i] += d * wrow[i];
            }
        }
        dz = std::move(dx);
    }
    return dz;
}

inline GradSet backward(const ParamSet& params, const NetworkSpec& spec, const Tape& tape,
                        const std::vector<double>& output_grad) {
    GradSet grads;
    grads.values.assign(spec.param_count(), 0.0);
    backward_accumulate(params, spec, tape, output_grad, grads);
    return grads;
}

// Gradient of output . output_grad with respect to the network input only;
// parameter gradients are not materialized.
inline std::vector<double> backward_input(const ParamSet& params, const NetworkSpec& spec,
                                          const Tape& tape,
                                          const std::vector<double>& output_grad) {
    if (static_cast<int>(output_grad.size()) != spec.output_dim())
        throw std::invalid_argument("backward_input: output_grad dimension mismatch");
    const int L = spec.num_affine_layers();

    std::vector<double> dz;
    const std::vector<double>& zlast = tape.pre[L - 1];
    switch (spec.output_head) {
        case OutputHead::Raw:
        case OutputHead::CategoricalLogits:
            dz = output_grad;
            break;
        case OutputHead::TanhBounded: {
            dz.resize(zlast.size());
            for (std::size_t i = 0; i < zlast.size(); ++i) {
                const double y = tape.head_out[i];
                dz[i] = output_grad[i] * (1.0 - y * y);
            }
            break;
        }
        case OutputHead::GaussianMeanVar: {
            const int d = spec.layer_widths.back();
            dz.resize(2 * d);
            for (int i = 0; i < d; ++i) dz[i] = output_grad[i];
            for (int i = 0; i < d; ++i)
                dz[d + i] = output_grad[d + i] * detail::sigmoid(zlast[d + i]);
            break;
        }
    }

    for (int l = L - 1; l >= 0; --l) {
        const int nin = spec.affine_in(l);
        const int nout = spec.affine_out(l);
        const double* w = params.layer_w(spec, l);
        if (l < L - 1) {
            for (int o = 0; o < nout; ++o)
                dz[o] *= detail::act_grad(spec.hidden_activations[l], tape.pre[l][o],
                                          tape.post[l][o]);
            if (l == 0 && spec.layer_norm_after_first) {
                const double* g = params.ln_gamma(spec);
                std::vector<double> dxhat(nout);
                double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
                for (int o = 0; o < nout; ++o) {
                    dxhat[o] = dz[o] * g[o];
                    mean_dxhat += dxhat[o];
                    mean_dxhat_xhat += dxhat[o] * tape.ln_xhat[o];
                }
                mean_dxhat /= nout;
                mean_dxhat_xhat /= nout;
                for (int o = 0; o < nout; ++o)
                    dz[o] = tape.ln_inv_std *
                            (dxhat[o] - mean_dxhat - tape.ln_xhat[o] * mean_dxhat_xhat);
            }
        }
        std::vector<double> dx(nin, 0.0);
        for (int o = 0; o < nout; ++o) {
            const double d = dz[o];
            const double* wrow = w + static_cast<std::size_t>(o) * nin;
            for (int i = 0; i < nin; ++i) dx[i] += d * wrow[i];
        }
        dz = std::move(dx);
    }
    return dz;
}

struct AdamState {
    std::vector<double> m;
    std::vector<double> v;
    std::uint64_t t = 0;

    static AdamState zeros(std::size_t n) {
        AdamState s;
        s.m.assign(n, 0.0);
        s.v.assign(n, 0.0);
        return s;
    }
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

inline void adam_step(ParamSet& params, const GradSet& grads, AdamState& state,
                      const AdamConfig& cfg) {
    const std::size_t n = params.values.size();
    if (grads.values.size() != n || state.m.size() != n)
        throw std::invalid_argument("adam_step: shape mismatch");
    for (double g : grads.values)
        if (!std::isfinite(g)) throw std::invalid_argument("adam_step: non-finite gradient");
    state.t += 1;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(state.t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(state.t));
    for (std::size_t i = 0; i < n; ++i) {
        const double g = grads.values[i];
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * g;
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * g * g;
        const double mhat = state.m[i] / bc1;
        const double vhat = state.v[i] / bc2;
        params.values[i] -= cfg.lr * mhat / (std::sqrt(vhat) + cfg.eps);
    }
}

}  // namespace gentle
