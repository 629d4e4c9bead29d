#pragma once

// Categorical value distributions over a fixed atom support, with the
// standard Bellman projection (shift-scale atoms, clip to support, split
// mass proportionally between neighboring atoms).

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace gentle {

struct AtomSupport {
    double v_min = -10.0;
    double v_max = 10.0;
    int count = 51;

    void validate() const {
        if (v_min >= v_max) throw std::invalid_argument("AtomSupport: v_min must be < v_max");
        if (count < 2) throw std::invalid_argument("AtomSupport: need at least 2 atoms");
    }
    double delta() const { return (v_max - v_min) / (count - 1); }
    double atom(int k) const { return v_min + k * delta(); }
};

struct CategoricalValueDist {
    std::vector<double> p;

    double expected_value(const AtomSupport& support) const {
        double e = 0.0;
        for (int k = 0; k < static_cast<int>(p.size()); ++k) e += p[k] * support.atom(k);
        return e;
    }
    double mass() const {
        double s = 0.0;
        for (double v : p) s += v;
        return s;
    }
};

inline CategoricalValueDist softmax_dist(const std::vector<double>& logits) {
    CategoricalValueDist d;
    d.p.resize(logits.size());
    double mx = logits[0];
    for (double l : logits) mx = std::max(mx, l);
    double sum = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        d.p[k] = std::exp(logits[k] - mx);
        sum += d.p[k];
    }
    for (double& v : d.p) v /= sum;
    return d;
}

// Projects the target distribution for z' = reward + gamma * z (or z' =
// reward when terminal) back onto the fixed support.
inline CategoricalValueDist categorical_project(const CategoricalValueDist& next_dist,
                                                double reward, double gamma, bool terminal,
                                                const AtomSupport& support) {
    if (static_cast<int>(next_dist.p.size()) != support.count)
        throw std::invalid_argument("categorical_project: distribution/support mismatch");
    CategoricalValueDist out;
    out.p.assign(support.count, 0.0);
    const double dz = support.delta();
    auto place = [&](double z, double mass) {
        const double zc = std::clamp(z, support.v_min, support.v_max);
        const double b = (zc - support.v_min) / dz;
        const int lo = static_cast<int>(std::floor(b));
        const int hi = std::min(lo + 1, support.count - 1);
        const double frac = b - lo;
        out.p[lo] += mass * (1.0 - frac);
        out.p[hi] += mass * frac;
    };
    if (terminal) {
        place(reward, 1.0);
    } else {
        for (int k = 0; k < support.count; ++k)
            if (next_dist.p[k] != 0.0) place(reward + gamma * support.atom(k), next_dist.p[k]);
    }
    return out;
}

}  // namespace gentle
