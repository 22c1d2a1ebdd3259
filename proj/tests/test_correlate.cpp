#include <cstdint>
#include <random>
#include <vector>

#include <gtest/gtest.h>

#include "eprcam/correlate.hpp"
#include "eprcam/error.hpp"

using namespace eprcam;
using namespace eprcam::correlate;

namespace {

std::vector<BinaryFrame> random_stack(int w, int h, int frames, double occupancy, std::uint64_t seed) {
    std::mt19937_64 gen(seed);
    std::bernoulli_distribution bit(occupancy);
    std::vector<BinaryFrame> stack;
    for (int f = 0; f < frames; ++f) {
        BinaryFrame frame(w, h);
        for (auto& b : frame.bits) b = bit(gen) ? 1 : 0;
        stack.push_back(frame);
    }
    return stack;
}

// Every ordered pair of pixels (including self pairs) between frames a and b.
void brute_pairs(const BinaryFrame& a, const BinaryFrame& b, CorrelationMode mode, CorrelationMap& map) {
    for (int y1 = 0; y1 < a.height; ++y1)
        for (int x1 = 0; x1 < a.width; ++x1) {
            if (!a.at(x1, y1)) continue;
            for (int y2 = 0; y2 < b.height; ++y2)
                for (int x2 = 0; x2 < b.width; ++x2) {
                    if (!b.at(x2, y2)) continue;
                    if (mode == CorrelationMode::Difference) {
                        ++map.count_ref(x1 - x2, y1 - y2);
                    } else {
                        ++map.count_ref(x1 + x2, y1 + y2);
                    }
                }
        }
}

CorrelationMap brute_signal(const std::vector<BinaryFrame>& s, CorrelationMode mode) {
    CorrelationMap map(mode, s[0].width, s[0].height);
    for (const auto& f : s) brute_pairs(f, f, mode, map);
    return map;
}

CorrelationMap brute_reference(const std::vector<BinaryFrame>& s, CorrelationMode mode) {
    CorrelationMap map(mode, s[0].width, s[0].height);
    for (std::size_t i = 0; i + 1 < s.size(); ++i) brute_pairs(s[i], s[i + 1], mode, map);
    return map;
}

bool same_counts(const CorrelationMap& a, const CorrelationMap& b) {
    if (a.grid_width() != b.grid_width() || a.grid_height() != b.grid_height()) return false;
    const auto ca = a.counts();
    const auto cb = b.counts();
    return std::equal(ca.begin(), ca.end(), cb.begin(), cb.end());
}

}  // namespace

TEST(Correlate, SparseMatchesBruteForce) {
    for (auto mode : {CorrelationMode::Difference, CorrelationMode::Sum}) {
        const auto s = random_stack(9, 7, 4, 0.2, 1);
        EXPECT_TRUE(same_counts(accumulate(s, mode), brute_signal(s, mode)));
        EXPECT_TRUE(same_counts(reference(s, mode), brute_reference(s, mode)));
    }
}

TEST(Correlate, FftMatchesSparseOnRandomStacks) {
    std::mt19937_64 gen(2);
    std::uniform_int_distribution<int> dim(1, 64);
    std::uniform_real_distribution<double> occ(0.0, 0.1);
    for (int t = 0; t < 25; ++t) {
        const int w = dim(gen), h = dim(gen);
        const auto s = random_stack(w, h, 3, occ(gen), 100 + t);
        for (auto mode : {CorrelationMode::Difference, CorrelationMode::Sum}) {
            EXPECT_TRUE(same_counts(fft_accumulate(s, mode), accumulate(s, mode))) << w << "x" << h;
            EXPECT_TRUE(same_counts(fft_reference(s, mode), reference(s, mode))) << w << "x" << h;
        }
    }
}

TEST(Correlate, EngineAutoPathMatchesSparse) {
    // A dense frame among sparse ones exercises both paths in one engine.
    auto s = random_stack(40, 30, 6, 0.02, 3);
    s[2] = random_stack(40, 30, 1, 0.5, 4)[0];
    for (auto mode : {CorrelationMode::Difference, CorrelationMode::Sum}) {
        EngineOptions opts;
        opts.sparse_max_ones = 100;
        opts.measure_plans = false;
        CorrelationEngine engine(mode, 40, 30, opts);
        for (const auto& f : s) engine.add(f);
        EXPECT_GT(engine.stats().spectral_frames, 0u);
        EXPECT_GT(engine.stats().sparse_frames, 0u);
        EXPECT_TRUE(same_counts(engine.signal(), accumulate(s, mode)));
        EXPECT_TRUE(same_counts(engine.reference(), reference(s, mode)));
        EXPECT_EQ(engine.frames(), s.size());
    }
}

TEST(Correlate, TotalsAreSquaredCounts) {
    const auto s = random_stack(20, 20, 5, 0.1, 5);
    const auto sig = accumulate(s, CorrelationMode::Difference);
    std::int64_t expected = 0;
    for (const auto& f : s) expected += static_cast<std::int64_t>(f.count() * f.count());
    EXPECT_EQ(sig.total(), expected);
    EXPECT_EQ(sig.frames_accumulated, s.size());
}

TEST(Correlate, PaddedSizeIsPowerOfTwoTimesSmallOdd) {
    for (int n = 1; n < 3000; n += 7) {
        const int p = padded_fft_size(n);
        EXPECT_GE(p, n);
        EXPECT_LT(p, 2 * n + 1);
        int r = p;
        while (r % 2 == 0) r /= 2;
        EXPECT_TRUE(r == 1 || r == 3 || r == 5 || r == 7) << n;
        // No smaller candidate of the same form fits.
        for (int m = n; m < p; ++m) {
            int q = m;
            while (q % 2 == 0) q /= 2;
            EXPECT_FALSE(q == 1 || q == 3 || q == 5 || q == 7) << n << " " << m;
        }
    }
    EXPECT_EQ(padded_fft_size(401), 448);
    EXPECT_EQ(padded_fft_size(255), 256);
    EXPECT_EQ(padded_fft_size(1), 1);
}

TEST(Correlate, SelfPairsRemovedBeforeSubtraction) {
    BinaryFrame f(5, 5);
    f.set(2, 2);
    const std::vector<BinaryFrame> s{f, BinaryFrame(5, 5)};
    const auto sig = accumulate(s, CorrelationMode::Difference);
    EXPECT_EQ(sig.count(0, 0), 1);
    MaskSet masks;
    masks.central = false;
    const auto sub = subtract(sig, reference(s, CorrelationMode::Difference), masks);
    EXPECT_DOUBLE_EQ(sub.value(0, 0), 0.0);

    const auto sum_sig = accumulate(s, CorrelationMode::Sum);
    EXPECT_EQ(sum_sig.count(4, 4), 1);
    const auto sum_sub = subtract(sum_sig, reference(s, CorrelationMode::Sum), masks);
    EXPECT_DOUBLE_EQ(sum_sub.value(4, 4), 0.0);
}

TEST(Correlate, UncorrelatedFramesSubtractToNoise) {
    const auto s = random_stack(24, 24, 400, 0.05, 6);
    const auto sig = accumulate(s, CorrelationMode::Difference);
    const auto ref = reference(s, CorrelationMode::Difference);
    const auto sub = subtract(sig, ref, MaskSet{});
    double total = 0;
    for (double v : sub.values()) total += v;
    // Expected excess is zero; the Poisson spread of the total is about sqrt(2 * signal total).
    EXPECT_LT(std::abs(total), 5.0 * std::sqrt(2.0 * sig.total()));
    const auto peak = peak_snr(sub, sig, ref, 2);
    EXPECT_LT(std::abs(peak.snr), 5.0);
}

TEST(Correlate, Masks) {
    const auto s = random_stack(10, 10, 10, 0.1, 7);
    const auto sig = accumulate(s, CorrelationMode::Difference);
    const auto ref = reference(s, CorrelationMode::Difference);
    MaskSet masks;
    masks.smear_rows = true;
    const auto sub = subtract(sig, ref, masks);
    EXPECT_TRUE(sub.is_masked(0, 0));
    EXPECT_TRUE(sub.is_masked(3, 1));
    EXPECT_TRUE(sub.is_masked(-4, -1));
    EXPECT_FALSE(sub.is_masked(0, 2));
    EXPECT_DOUBLE_EQ(sub.value(3, 1), 0.0);

    const auto sum = subtract(accumulate(s, CorrelationMode::Sum), reference(s, CorrelationMode::Sum), masks);
    EXPECT_TRUE(sum.masked_bins().empty());
}

TEST(Correlate, ReferenceScaleMatchesRates) {
    const auto s = random_stack(8, 8, 11, 0.1, 8);
    const auto sub = subtract(accumulate(s, CorrelationMode::Difference), reference(s, CorrelationMode::Difference),
                              MaskSet{});
    EXPECT_DOUBLE_EQ(sub.reference_scale, 11.0 / 10.0);
    EXPECT_EQ(sub.frames, 11u);
}

TEST(Correlate, ProfilesSliceTheMap) {
    const auto s = random_stack(6, 5, 3, 0.3, 9);
    const auto sub = subtract(accumulate(s, CorrelationMode::Difference), reference(s, CorrelationMode::Difference),
                              MaskSet{});
    const auto row = row_profile(sub, 1);
    ASSERT_EQ(row.value.size(), static_cast<std::size_t>(sub.grid_width()));
    EXPECT_EQ(row.coordinate.front(), -5.0);
    EXPECT_DOUBLE_EQ(row.value[5 + 2], sub.value(2, 1));
    const auto col = column_profile(sub, 0);
    ASSERT_EQ(col.value.size(), static_cast<std::size_t>(sub.grid_height()));
    EXPECT_EQ(col.masked[4], 1);
}

TEST(Correlate, JointMatchesBruteForce) {
    const auto s = random_stack(7, 6, 5, 0.25, 10);
    for (auto axis : {Axis::X, Axis::Y}) {
        const auto j = joint_1d(s, axis, model::Plane::ImagePlane, false);
        const int n = axis == Axis::X ? 7 : 6;
        ASSERT_EQ(j.size, n);
        std::vector<double> oracle(n * n, 0.0);
        for (const auto& f : s) {
            std::vector<double> m(n, 0.0);
            for (int y = 0; y < f.height; ++y)
                for (int x = 0; x < f.width; ++x)
                    if (f.at(x, y)) m[axis == Axis::X ? x : y] += 1;
            for (int a = 0; a < n; ++a)
                for (int b = 0; b < n; ++b) oracle[a * n + b] += m[a] * m[b];
        }
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b) EXPECT_DOUBLE_EQ(j.at(a, b), oracle[a * n + b]);
    }
}

TEST(Correlate, JointBlocksMergeWithoutStraddlingPair) {
    const auto s = random_stack(12, 12, 20, 0.1, 11);
    JointAccumulator all(Axis::X, 12, 12), first(Axis::X, 12, 12), second(Axis::X, 12, 12);
    for (std::size_t i = 0; i < s.size(); ++i) {
        all.add(s[i]);
        (i < 10 ? first : second).add(s[i]);
    }
    first += second;
    EXPECT_EQ(first.frames(), all.frames());
    EXPECT_EQ(all.reference_pairs(), 19u);
    EXPECT_EQ(first.reference_pairs(), 18u);
    const auto a = all.result(model::Plane::FarField, false);
    const auto b = first.result(model::Plane::FarField, false);
    EXPECT_EQ(a.values, b.values);
}

TEST(Correlate, JointBackgroundSubtractionRemovesDiagonalSelfPairs) {
    const auto s = random_stack(16, 16, 2000, 0.05, 12);
    const auto j = joint_1d(s, Axis::X, model::Plane::ImagePlane, true);
    EXPECT_TRUE(j.background_subtracted);
    double diag = 0, off = 0;
    for (int a = 0; a < 16; ++a) {
        diag += j.at(a, a);
        for (int b = 0; b < 16; ++b)
            if (a != b) off += j.at(a, b);
    }
    // Each column sees about 2000 * 16 * 0.05 = 1600 singles; the residual
    // must be far below that once self pairs are removed.
    EXPECT_LT(std::abs(diag / 16.0), 200.0);
    EXPECT_LT(std::abs(off / 240.0), 200.0);
}

TEST(Correlate, DimensionMismatchRejected) {
    CorrelationEngine engine(CorrelationMode::Difference, 8, 8);
    EXPECT_THROW(engine.add(BinaryFrame(4, 4)), Error);
    const auto a = random_stack(8, 8, 2, 0.1, 13);
    EXPECT_THROW(reference(std::span(a).first(1), CorrelationMode::Difference), Error);
}
