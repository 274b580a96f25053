#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace nncalc {

// Class index doubles as the histogram slot: N = 0, P = 1.
enum class Label : int { N = 0, P = 1 };

inline constexpr int kNumClasses = 2;
inline constexpr double kDomainHalfWidth = 6.0;

std::string_view to_string(Label label);
Label parse_label(std::string_view text);
inline int class_index(Label label) { return static_cast<int>(label); }
inline double target_of(Label label) { return label == Label::P ? 1.0 : -1.0; }

struct LabeledPoint {
    double x = 0.0;
    double y = 0.0;
    Label label = Label::N;
    Label original_label = Label::N;
    bool trojaned = false;

    bool operator==(const LabeledPoint&) const = default;
};

enum class Pattern { circle, xor_, gauss, spiral };

std::string_view to_string(Pattern pattern);
Pattern parse_pattern(std::string_view text);

enum class RegionShape { disk, square };

struct TrojanRegion {
    RegionShape shape = RegionShape::disk;
    double cx = 0.0;
    double cy = 0.0;
    double size = 1.0;  // area
    Label source = Label::P;
    Label target = Label::N;

    bool contains(double x, double y) const;
    // Disk radius or square half-side derived from the area.
    double extent() const;

    bool operator==(const TrojanRegion&) const = default;
};

enum class TrojanId { T1, T2, T3, T4, T5, T6, T7, T8, T9, custom };

std::string_view to_string(TrojanId id);
TrojanId parse_trojan_id(std::string_view text);

struct TrojanSpec {
    TrojanId id = TrojanId::custom;
    std::vector<TrojanRegion> regions;

    bool operator==(const TrojanSpec&) const = default;
};

// Fixed region list for a preset, plus the pattern the preset is drawn on.
TrojanSpec trojan_preset(TrojanId id);
Pattern preset_pattern(TrojanId id);

struct DatasetSpec {
    Pattern pattern = Pattern::circle;
    int npts = 500;
    double noise = 0.0;
    std::optional<TrojanSpec> trojan;
    std::uint64_t seed = 0;
    double train_ratio = 0.5;

    bool operator==(const DatasetSpec&) const = default;
};

// Convenience: the preset's pattern with its trojan attached.
DatasetSpec preset_dataset(TrojanId id, int npts, double noise, std::uint64_t seed);

struct Dataset {
    DatasetSpec spec;
    std::vector<LabeledPoint> train;
    std::vector<LabeledPoint> test;

    std::size_t size() const { return train.size() + test.size(); }
    std::vector<LabeledPoint> all_points() const;
    // Same points with every trojan flip undone.
    std::vector<LabeledPoint> clean_points() const;

    bool operator==(const Dataset&) const = default;
};

void validate(const DatasetSpec& spec);
void validate(const TrojanSpec& trojan);

Dataset generate(const DatasetSpec& spec);
std::vector<LabeledPoint> apply_trojan(std::vector<LabeledPoint> points, const TrojanSpec& trojan);
Dataset regenerate(const Dataset& dataset, std::uint64_t new_seed);
Dataset reshuffle(const Dataset& dataset, std::uint64_t seed);

// CSV: x,y,label,original_label,trojaned,split
void write_csv(std::ostream& out, const Dataset& dataset);
Dataset read_csv(std::istream& in);

}  // namespace nncalc
