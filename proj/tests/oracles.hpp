#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's numeric code paths.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "nncalc/mlp.hpp"
#include "nncalc/states.hpp"

namespace oracle {

inline double act(nncalc::Activation a, double z) {
    switch (a) {
        case nncalc::Activation::tanh: return std::tanh(z);
        case nncalc::Activation::relu: return z > 0.0 ? z : 0.0;
        case nncalc::Activation::sigmoid: return 1.0 / (1.0 + std::exp(-z));
        case nncalc::Activation::linear: return z;
    }
    return z;
}

struct Trace {
    std::vector<std::vector<double>> z;  // pre-activations per layer
    std::vector<std::vector<double>> a;  // outputs per layer
};

// Straight-line matrix-vector forward pass.
inline Trace forward(const nncalc::Network& net, const std::vector<double>& input) {
    Trace t;
    std::vector<double> x = input;
    for (const auto& layer : net.layers) {
        std::vector<double> z(static_cast<std::size_t>(layer.outputs));
        std::vector<double> a(z.size());
        for (int o = 0; o < layer.outputs; ++o) {
            double s = layer.biases[static_cast<std::size_t>(o)];
            for (int i = 0; i < layer.inputs; ++i) {
                s += x[static_cast<std::size_t>(i)] * layer.weights[static_cast<std::size_t>(i * layer.outputs + o)];
            }
            z[static_cast<std::size_t>(o)] = s;
            a[static_cast<std::size_t>(o)] = act(layer.activation, s);
        }
        t.z.push_back(z);
        t.a.push_back(a);
        x = a;
    }
    return t;
}

// q = count / class_total; sum q log2 q - log2(m/n).
inline double modified_kl(const std::vector<double>& counts, double n, double m) {
    double total = 0.0;
    for (double c : counts) total += c;
    double s = 0.0;
    for (double c : counts) {
        if (c > 0.0) {
            const double q = c / total;
            s += q * std::log2(q);
        }
    }
    return s - std::log2(m / n);
}

// sum q log2(q/p) over the class's states, with p = m/n inside `block` and 0
// outside. Returns NaN when some used state is outside the block.
inline double exact_kl(const std::map<std::string, double>& counts, const std::vector<std::string>& block, double n,
                       double m) {
    double total = 0.0;
    for (const auto& [s, c] : counts) total += c;
    double d = 0.0;
    for (const auto& [s, c] : counts) {
        if (c <= 0.0) continue;
        if (std::find(block.begin(), block.end(), s) == block.end()) return std::nan("");
        const double q = c / total;
        d += q * std::log2(q / (m / n));
    }
    return d;
}

inline std::string bits_of(unsigned value, int width) {
    std::string s(static_cast<std::size_t>(width), '0');
    for (int b = 0; b < width; ++b) {
        if (value & (1u << (width - 1 - b))) s[static_cast<std::size_t>(b)] = '1';
    }
    return s;
}

// Every subset of {0..n-1} with exactly k elements.
inline std::vector<std::vector<unsigned>> combinations(unsigned n, unsigned k) {
    std::vector<std::vector<unsigned>> out;
    std::vector<bool> pick(n, false);
    std::fill(pick.begin(), pick.begin() + k, true);
    do {
        std::vector<unsigned> c;
        for (unsigned i = 0; i < n; ++i) {
            if (pick[i]) c.push_back(i);
        }
        out.push_back(c);
    } while (std::prev_permutation(pick.begin(), pick.end()));
    return out;
}

// Average ranks, then Pearson on ranks.
inline double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    const auto rank = [](const std::vector<double>& v) {
        std::vector<double> r(v.size());
        for (std::size_t i = 0; i < v.size(); ++i) {
            double less = 0.0, equal = 0.0;
            for (double w : v) {
                less += w < v[i] ? 1.0 : 0.0;
                equal += w == v[i] ? 1.0 : 0.0;
            }
            r[i] = less + (equal + 1.0) / 2.0;
        }
        return r;
    };
    const auto ra = rank(a), rb = rank(b);
    const double n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        ma += ra[i] / n;
        mb += rb[i] / n;
    }
    double sab = 0.0, saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < ra.size(); ++i) {
        sab += (ra[i] - ma) * (rb[i] - mb);
        saa += (ra[i] - ma) * (ra[i] - ma);
        sbb += (rb[i] - mb) * (rb[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

inline double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace oracle
