#include "nncalc/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>

#include "nncalc/errors.hpp"
#include "nncalc/rng.hpp"

namespace nncalc {
namespace {

constexpr double kRadius = 5.0;
constexpr double kSpiralTurns = 2.75 * std::numbers::pi;
constexpr double kXorPadding = 0.3;

// Independent RNG streams derived from one user seed.
enum Stream : std::uint64_t { kPoints = 1, kNoise = 2, kSplit = 3, kReshuffle = 4 };

LabeledPoint make_point(double x, double y, Label label) {
    return LabeledPoint{x, y, label, label, false};
}

LabeledPoint sample_point(Pattern pattern, Label label, Rng& rng) {
    const bool positive = label == Label::P;
    switch (pattern) {
        case Pattern::circle: {
            const double angle = rng.uniform(0.0, 2.0 * std::numbers::pi);
            double r = 0.0;
            if (positive) {
                r = 0.5 * kRadius * std::sqrt(rng.uniform());
            } else {
                const double inner = 0.75 * kRadius;
                r = std::sqrt(inner * inner + rng.uniform() * (kRadius * kRadius - inner * inner));
            }
            return make_point(r * std::sin(angle), r * std::cos(angle), label);
        }
        case Pattern::xor_: {
            // P lives in quadrants 1 and 3, N in 2 and 4.
            const bool flip = rng.uniform() < 0.5;
            const double ax = rng.uniform(kXorPadding, kRadius);
            const double ay = rng.uniform(kXorPadding, kRadius);
            const double sx = flip ? -1.0 : 1.0;
            const double sy = positive ? sx : -sx;
            return make_point(sx * ax, sy * ay, label);
        }
        case Pattern::gauss: {
            const double center = positive ? 2.0 : -2.0;
            const double x = rng.normal(center, 1.0);
            const double y = rng.normal(center, 1.0);
            return make_point(x, y, label);
        }
        case Pattern::spiral: {
            const double t = rng.uniform(0.0, kSpiralTurns);
            const double r = t * kRadius / kSpiralTurns;
            const double phase = positive ? 0.0 : std::numbers::pi;
            return make_point(r * std::sin(t + phase), r * std::cos(t + phase), label);
        }
    }
    return make_point(0.0, 0.0, label);
}

double clamp_domain(double v) { return std::clamp(v, -kDomainHalfWidth, kDomainHalfWidth); }

std::size_t train_count(const DatasetSpec& spec, std::size_t total) {
    return static_cast<std::size_t>(std::lround(spec.train_ratio * static_cast<double>(total)));
}

Dataset split(const DatasetSpec& spec, std::vector<LabeledPoint> points, Rng& rng) {
    rng.shuffle(std::span<LabeledPoint>(points));
    const std::size_t ntrain = train_count(spec, points.size());
    Dataset out;
    out.spec = spec;
    out.train.assign(points.begin(), points.begin() + static_cast<std::ptrdiff_t>(ntrain));
    out.test.assign(points.begin() + static_cast<std::ptrdiff_t>(ntrain), points.end());
    if (spec.trojan) out.train = apply_trojan(std::move(out.train), *spec.trojan);
    return out;
}

LabeledPoint cleaned(LabeledPoint p) {
    p.label = p.original_label;
    p.trojaned = false;
    return p;
}

}  // namespace

std::string_view to_string(Label label) { return label == Label::P ? "P" : "N"; }

Label parse_label(std::string_view text) {
    if (text == "P") return Label::P;
    if (text == "N") return Label::N;
    throw ValidationError("label", "expected P or N, got '" + std::string(text) + "'");
}

std::string_view to_string(Pattern pattern) {
    switch (pattern) {
        case Pattern::circle: return "circle";
        case Pattern::xor_: return "xor";
        case Pattern::gauss: return "gauss";
        case Pattern::spiral: return "spiral";
    }
    return "circle";
}

Pattern parse_pattern(std::string_view text) {
    for (Pattern p : {Pattern::circle, Pattern::xor_, Pattern::gauss, Pattern::spiral}) {
        if (to_string(p) == text) return p;
    }
    throw ValidationError("pattern", "unknown pattern '" + std::string(text) + "'");
}

double TrojanRegion::extent() const {
    return shape == RegionShape::disk ? std::sqrt(size / std::numbers::pi) : 0.5 * std::sqrt(size);
}

bool TrojanRegion::contains(double x, double y) const {
    const double e = extent();
    const double dx = x - cx;
    const double dy = y - cy;
    if (shape == RegionShape::disk) return dx * dx + dy * dy <= e * e;
    return std::abs(dx) <= e && std::abs(dy) <= e;
}

std::string_view to_string(TrojanId id) {
    static constexpr std::array<std::string_view, 10> names{"T1", "T2", "T3", "T4", "T5",
                                                            "T6", "T7", "T8", "T9", "custom"};
    return names[static_cast<std::size_t>(id)];
}

TrojanId parse_trojan_id(std::string_view text) {
    for (int i = 0; i <= static_cast<int>(TrojanId::custom); ++i) {
        const auto id = static_cast<TrojanId>(i);
        if (to_string(id) == text) return id;
    }
    throw ValidationError("trojan.id", "unknown trojan '" + std::string(text) + "'");
}

Pattern preset_pattern(TrojanId id) {
    switch (id) {
        case TrojanId::T1:
        case TrojanId::T2: return Pattern::circle;
        case TrojanId::T3:
        case TrojanId::T4: return Pattern::xor_;
        case TrojanId::T5:
        case TrojanId::T6:
        case TrojanId::T7: return Pattern::gauss;
        case TrojanId::T8:
        case TrojanId::T9: return Pattern::spiral;
        case TrojanId::custom: break;
    }
    throw ValidationError("trojan.id", "custom trojans have no preset pattern");
}

TrojanSpec trojan_preset(TrojanId id) {
    const double base_area = std::numbers::pi * 0.75 * 0.75;
    const auto disk = [](double x, double y, double area, Label from, Label to) {
        return TrojanRegion{RegionShape::disk, x, y, area, from, to};
    };
    // Point on a spiral arm at parameter t (P arm: phase 0, N arm: phase pi).
    const auto arm = [](double t, Label label) {
        const double r = t * kRadius / kSpiralTurns;
        const double phase = label == Label::P ? 0.0 : std::numbers::pi;
        return std::array<double, 2>{r * std::sin(t + phase), r * std::cos(t + phase)};
    };
    const double pi = std::numbers::pi;

    TrojanSpec spec;
    spec.id = id;
    switch (id) {
        case TrojanId::T1:
            spec.regions = {disk(0.75, 1.125, base_area, Label::P, Label::N)};
            break;
        case TrojanId::T2:
            spec.regions = {disk(0.75, 1.125, 2.25 * base_area, Label::P, Label::N)};
            break;
        case TrojanId::T3:
            spec.regions = {{RegionShape::square, 2.5, 2.5, pi, Label::P, Label::N}};
            break;
        case TrojanId::T4:
            spec.regions = {disk(2.5, 2.5, pi, Label::P, Label::N)};
            break;
        case TrojanId::T5:
            spec.regions = {disk(2.0, 2.0, base_area, Label::P, Label::N)};
            break;
        case TrojanId::T6:
            spec.regions = {disk(0.9, 0.9, base_area, Label::P, Label::N)};
            break;
        case TrojanId::T7:
            spec.regions = {disk(1.4, 2.6, 0.5 * base_area, Label::P, Label::N),
                            disk(2.6, 1.4, 0.5 * base_area, Label::P, Label::N)};
            break;
        case TrojanId::T8: {
            const auto c = arm(1.5 * pi, Label::P);
            spec.regions = {disk(c[0], c[1], base_area, Label::P, Label::N)};
            break;
        }
        case TrojanId::T9: {
            const double area = pi * 0.5 * 0.5;
            for (double t : {1.0 * pi, 2.25 * pi}) {
                const auto p = arm(t, Label::P);
                const auto n = arm(t, Label::N);
                spec.regions.push_back(disk(p[0], p[1], area, Label::P, Label::N));
                spec.regions.push_back(disk(n[0], n[1], area, Label::N, Label::P));
            }
            break;
        }
        case TrojanId::custom: break;
    }
    return spec;
}

DatasetSpec preset_dataset(TrojanId id, int npts, double noise, std::uint64_t seed) {
    DatasetSpec spec;
    spec.pattern = preset_pattern(id);
    spec.npts = npts;
    spec.noise = noise;
    spec.seed = seed;
    spec.trojan = trojan_preset(id);
    return spec;
}

void validate(const TrojanSpec& trojan) {
    for (std::size_t i = 0; i < trojan.regions.size(); ++i) {
        const TrojanRegion& r = trojan.regions[i];
        const std::string field = "trojan.regions[" + std::to_string(i) + "]";
        if (!(r.size > 0.0) || !std::isfinite(r.size)) throw ValidationError(field + ".size", "must be positive");
        if (r.source == r.target) throw ValidationError(field, "source and target class must differ");
        const double e = r.extent();
        if (!std::isfinite(r.cx) || !std::isfinite(r.cy) || std::abs(r.cx) + e > kDomainHalfWidth ||
            std::abs(r.cy) + e > kDomainHalfWidth) {
            throw ValidationError(field, "region leaves the [-6, 6] domain");
        }
    }
}

void validate(const DatasetSpec& spec) {
    if (spec.npts < 4) throw ValidationError("npts", "need at least 4 points");
    if (!(spec.noise >= 0.0 && spec.noise <= 0.5)) throw ValidationError("noise", "must be in [0, 0.5]");
    if (!(spec.train_ratio > 0.0 && spec.train_ratio < 1.0)) {
        throw ValidationError("train_ratio", "must be in (0, 1)");
    }
    if (train_count(spec, static_cast<std::size_t>(spec.npts)) == 0) {
        throw ValidationError("train_ratio", "training split would be empty");
    }
    if (spec.trojan) validate(*spec.trojan);
}

std::vector<LabeledPoint> Dataset::all_points() const {
    std::vector<LabeledPoint> out(train);
    out.insert(out.end(), test.begin(), test.end());
    return out;
}

std::vector<LabeledPoint> Dataset::clean_points() const {
    std::vector<LabeledPoint> out;
    out.reserve(size());
    for (const auto& p : train) out.push_back(cleaned(p));
    for (const auto& p : test) out.push_back(cleaned(p));
    return out;
}

Dataset generate(const DatasetSpec& spec) {
    validate(spec);
    Rng point_rng(Rng::derive(spec.seed, kPoints));
    Rng noise_rng(Rng::derive(spec.seed, kNoise));
    Rng split_rng(Rng::derive(spec.seed, kSplit));

    const int n_pos = (spec.npts + 1) / 2;
    std::vector<LabeledPoint> points;
    points.reserve(static_cast<std::size_t>(spec.npts));
    for (int i = 0; i < spec.npts; ++i) {
        const Label label = i < n_pos ? Label::P : Label::N;
        LabeledPoint p = sample_point(spec.pattern, label, point_rng);
        const double jitter = spec.noise * kDomainHalfWidth;
        const double dx = noise_rng.uniform(-jitter, jitter);
        const double dy = noise_rng.uniform(-jitter, jitter);
        p.x = clamp_domain(p.x + dx);
        p.y = clamp_domain(p.y + dy);
        points.push_back(p);
    }
    return split(spec, std::move(points), split_rng);
}

std::vector<LabeledPoint> apply_trojan(std::vector<LabeledPoint> points, const TrojanSpec& trojan) {
    validate(trojan);
    for (auto& p : points) {
        for (const auto& region : trojan.regions) {
            if (p.original_label == region.source && region.contains(p.x, p.y)) {
                p.label = region.target;
                p.trojaned = true;
                break;
            }
        }
    }
    return points;
}

Dataset regenerate(const Dataset& dataset, std::uint64_t new_seed) {
    DatasetSpec spec = dataset.spec;
    spec.seed = new_seed;
    return generate(spec);
}

Dataset reshuffle(const Dataset& dataset, std::uint64_t seed) {
    Rng rng(Rng::derive(seed, kReshuffle));
    return split(dataset.spec, dataset.clean_points(), rng);
}

void write_csv(std::ostream& out, const Dataset& dataset) {
    out << "x,y,label,original_label,trojaned,split\n";
    char buf[96];
    const auto emit = [&](const LabeledPoint& p, const char* split_name) {
        std::snprintf(buf, sizeof buf, "%.17g,%.17g,", p.x, p.y);
        out << buf << to_string(p.label) << ',' << to_string(p.original_label) << ','
            << (p.trojaned ? 1 : 0) << ',' << split_name << '\n';
    };
    for (const auto& p : dataset.train) emit(p, "train");
    for (const auto& p : dataset.test) emit(p, "test");
}

Dataset read_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "x,y,label,original_label,trojaned,split") {
        throw ValidationError("csv", "missing or unexpected header");
    }
    Dataset out;
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) cells.push_back(cell);
        const std::string field = "csv.row[" + std::to_string(row) + "]";
        if (cells.size() != 6) throw ValidationError(field, "expected 6 columns");
        LabeledPoint p;
        try {
            p.x = std::stod(cells[0]);
            p.y = std::stod(cells[1]);
        } catch (const std::exception&) {
            throw ValidationError(field, "bad coordinate");
        }
        p.label = parse_label(cells[2]);
        p.original_label = parse_label(cells[3]);
        p.trojaned = cells[4] == "1";
        if (p.trojaned != (p.label != p.original_label)) {
            throw ValidationError(field, "trojaned flag disagrees with labels");
        }
        if (cells[5] == "train") {
            out.train.push_back(p);
        } else if (cells[5] == "test") {
            out.test.push_back(p);
        } else {
            throw ValidationError(field, "split must be train or test");
        }
    }
    out.spec.npts = static_cast<int>(out.size());
    if (out.size() > 0) out.spec.train_ratio = static_cast<double>(out.train.size()) / static_cast<double>(out.size());
    return out;
}

}  // namespace nncalc
