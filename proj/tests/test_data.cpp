// Tests for pattern enumeration, frame simulation, the geometry-free ratio
// and its reference-subtracted form, and deterministic noise injection.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <limits>
#include <map>
#include <set>
#include <vector>

#include "doctest.h"
#include "eit/core.hpp"
#include "eit/data.hpp"
#include "eit/forward.hpp"
#include "eit/geometry.hpp"

using namespace eit;

namespace {

// Independent oracle: count quadruples (i,j,k,l) over an 8-label window with
// i<j, k<l, i<k, j!=l by brute force.
int brute_force_pattern_count() {
    int count = 0;
    for (int i = 1; i <= 8; ++i)
        for (int j = i + 1; j <= 8; ++j)
            for (int k = 1; k <= 8; ++k)
                for (int l = k + 1; l <= 8; ++l) {
                    if (!(i < k)) continue;
                    if (j == l) continue;
                    ++count;
                }
    return count;
}

struct TwoLayerSetup {
    ElectrodeConfig electrodes;
    Mesh mesh_u;
    Mesh mesh_v;
    std::vector<double> sigma;
};

// Disk of radius 1 with 8 electrodes; homogeneous or fat-over-muscle layering.
TwoLayerSetup make_setup(double fat_depth, double sigma_fat, double sigma_muscle) {
    BoundaryShape shape = BoundaryShape::circle(1.0);
    TwoLayerSetup s;
    s.electrodes = equispaced_electrodes(shape, 8, 0.03);
    std::map<RegionTag, double> cond = {{RegionTag::Fat, sigma_fat},
                                        {RegionTag::Muscle, sigma_muscle}};
    LayeredPhantom ph =
        build_layered_phantom(shape, s.electrodes, MeshOptions{0.03, 0.015, 0.4}, fat_depth, cond);
    s.mesh_u = ph.mesh;
    s.sigma = ph.sigma;
    s.mesh_v = generate_boundary_mesh(shape, s.electrodes, MeshOptions{0.033, 0.0165, 0.4});
    return s;
}

int count_valid(const MeasurementFrame& frame) {
    int n = 0;
    for (const FrameRecord& r : frame.records)
        if (r.valid) ++n;
    return n;
}

// Exact boundary-voltage strength of a pattern on the unit disk with
// equispaced electrodes: log of the cross-chord ratio. An 8-electrode ring
// contains patterns whose exact voltage is zero by reflection symmetry (an
// antipodal pair aligned with the other pair's axis); their simulated ratio
// is pure discretization residue, so ratio assertions skip them. The
// smallest nonzero |log ratio| on the 8-ring is 0.158, so a 0.1 threshold
// separates the two classes with margin.
double chord_log_ratio(const Pattern& p, int electrode_count) {
    auto chord = [&](int a, int b) {
        double ta = kTwoPi * (a - 1) / electrode_count;
        double tb = kTwoPi * (b - 1) / electrode_count;
        return std::hypot(std::cos(ta) - std::cos(tb), std::sin(ta) - std::sin(tb));
    };
    return std::log(chord(p.k_plus, p.l_minus) * chord(p.k_minus, p.l_plus) /
                    (chord(p.k_plus, p.l_plus) * chord(p.k_minus, p.l_minus)));
}

bool pattern_resolvable(const Pattern& p, int electrode_count) {
    return std::abs(chord_log_ratio(p, electrode_count)) >= 0.1;
}

}  // namespace

TEST_CASE("pattern enumeration: 266 combinations, every constraint holds") {
    PatternSet set = enumerate_patterns(4, 32);
    CHECK(static_cast<int>(set.patterns.size()) == 266);
    CHECK(brute_force_pattern_count() == 266);
    CHECK(set.n == 4);
    // All labels stay inside the window around electrode 4 (labels 1..8).
    for (const Pattern& p : set.patterns)
        for (int lab : {p.k_plus, p.k_minus, p.l_plus, p.l_minus}) {
            CHECK(lab >= 1);
            CHECK(lab <= 8);
        }
    // Enumeration is duplicate-free.
    std::set<std::array<int, 4>> seen;
    for (const Pattern& p : set.patterns)
        seen.insert({p.k_plus, p.k_minus, p.l_plus, p.l_minus});
    CHECK(seen.size() == set.patterns.size());
}

TEST_CASE("reference pattern: (n, n+1, n-1, n+2) reduced into 1..N_E") {
    PatternSet set = enumerate_patterns(4, 32);
    CHECK(set.reference == Pattern{4, 5, 3, 6});
    // Wrap-around cases.
    CHECK(enumerate_patterns(1, 32).reference == Pattern{1, 2, 32, 3});
    CHECK(enumerate_patterns(32, 32).reference == Pattern{32, 1, 31, 2});
    CHECK(enumerate_patterns(1, 8).reference == Pattern{1, 2, 8, 3});
    CHECK_THROWS_AS(enumerate_patterns(1, 7), Error);
    CHECK_THROWS_AS(enumerate_patterns(0, 32), Error);
    CHECK_THROWS_AS(enumerate_patterns(33, 32), Error);
}

TEST_CASE("window reduction: n = 1 and n = 32 wrap modulo the electrode count") {
    for (int n : {1, 4, 17, 32}) {
        PatternSet set = enumerate_patterns(n, 32);
        auto window = electrode_neighborhood(n, 32);
        std::set<int> allowed(window.begin(), window.end());
        for (const Pattern& p : set.patterns)
            for (int lab : {p.k_plus, p.k_minus, p.l_plus, p.l_minus}) CHECK(allowed.count(lab) == 1);
    }
}

TEST_CASE("physical filter: 210 of 266 patterns have disjoint drive and measure pairs") {
    PatternSet set = enumerate_patterns(4, 32);
    int physical = 0;
    for (const Pattern& p : set.patterns)
        if (pattern_is_physical(p)) ++physical;
    CHECK(physical == 210);
    CHECK(266 - physical == 56);
    CHECK(pattern_is_physical(Pattern{1, 2, 3, 4}));
    CHECK(!pattern_is_physical(Pattern{1, 2, 2, 4}));
    CHECK(!pattern_is_physical(Pattern{1, 4, 2, 4}));
    CHECK(pattern_is_physical(set.reference));
}

TEST_CASE("homogeneous frame: every valid ratio recovers sigma = 3 within 1%") {
    TwoLayerSetup s = make_setup(0.0, 3.0, 3.0);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame frame = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);

    REQUIRE(frame.records.size() == set.patterns.size() + 1);
    CHECK(frame.records.back().is_reference);
    CHECK(frame.physical_count == 210);
    CHECK(count_valid(frame) == 211);  // 210 physical + reference
    CHECK(frame.g_ref == doctest::Approx(3.0).epsilon(0.01));
    for (const FrameRecord& rec : frame.records) {
        if (!rec.valid) {
            CHECK(std::isnan(rec.G));
            CHECK(std::isnan(rec.B));
            continue;
        }
        CHECK(rec.G == rec.V / rec.U);
        if (!pattern_resolvable(rec.pattern, 8)) continue;
        CHECK(rec.G == doctest::Approx(3.0).epsilon(0.01));
    }
}

TEST_CASE("homogeneous frame: reference-subtracted values vanish to tolerance") {
    TwoLayerSetup s = make_setup(0.0, 1.0, 1.0);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame frame = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    double bound = 1e-3 * std::abs(1.0 / frame.g_ref);
    CHECK(frame.reference().B == 0.0);  // the reference against itself, exactly
    for (const FrameRecord& rec : frame.records) {
        if (!rec.valid || !pattern_resolvable(rec.pattern, 8)) continue;
        CHECK(std::abs(rec.B) < bound);
    }
}

TEST_CASE("two-layer frame: deep-sensing patterns see the conductive interior") {
    // Resistive boundary layer (fat) over a conductive core (muscle): patterns
    // whose drive and measure pairs span the window sense more of the core, so
    // their ratio exceeds the local reference and B = 1/G - 1/G_ref < 0.
    TwoLayerSetup s = make_setup(0.15, 1.0 / 15, 1.0 / 3);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame frame = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);

    double bound = 1e-3 * std::abs(1.0 / frame.g_ref);
    const FrameRecord* deep = nullptr;
    for (const FrameRecord& rec : frame.records)
        if (rec.valid && rec.pattern == Pattern{1, 8, 3, 6}) deep = &rec;
    REQUIRE(deep != nullptr);
    CHECK(deep->B < 0.0);
    CHECK(std::abs(deep->B) > bound);  // clearly above the discretization floor

    // The trend holds in aggregate: the mean B over wide-drive patterns is negative.
    double mean_wide = 0.0;
    int n_wide = 0;
    for (const FrameRecord& rec : frame.records) {
        if (!rec.valid || rec.is_reference) continue;
        if (!pattern_resolvable(rec.pattern, 8)) continue;
        int spread = std::abs(rec.pattern.k_plus - rec.pattern.k_minus);
        if (spread >= 5) {
            mean_wide += rec.B;
            ++n_wide;
        }
    }
    REQUIRE(n_wide > 10);
    CHECK(mean_wide / n_wide < 0.0);
}

TEST_CASE("scaling sigma scales the ratio and preserves the null") {
    TwoLayerSetup s = make_setup(0.0, 1.0, 1.0);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame base = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    std::vector<double> scaled(s.sigma.size(), 4.0);
    MeasurementFrame frame4 = simulate_frame(s.mesh_u, scaled, s.mesh_v, s.electrodes, set);

    // The contact-impedance terms do not scale with sigma, so the ratio scales
    // with c only up to discretization tolerance, and B's zero is preserved.
    CHECK(frame4.g_ref == doctest::Approx(4.0 * base.g_ref).epsilon(0.01));
    double bound = 1e-3 * std::abs(1.0 / frame4.g_ref);
    for (std::size_t i = 0; i < frame4.records.size(); ++i) {
        const FrameRecord& rec = frame4.records[i];
        if (!rec.valid || !pattern_resolvable(rec.pattern, 8)) continue;
        CHECK(rec.G == doctest::Approx(4.0 * base.records[i].G).epsilon(0.01));
        CHECK(std::abs(rec.B) < bound);
    }
}

TEST_CASE("reference-subtracted values are antisymmetric under role exchange") {
    TwoLayerSetup s = make_setup(0.15, 1.0 / 15, 1.0 / 3);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame frame = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    const FrameRecord& ref = frame.reference();
    for (const FrameRecord& rec : frame.records) {
        if (!rec.valid || rec.is_reference) continue;
        double forward = 1.0 / rec.G - 1.0 / ref.G;
        double reverse = 1.0 / ref.G - 1.0 / rec.G;
        CHECK(forward == -reverse);  // exact in floating point
    }
}

TEST_CASE("alpha ratios: unit at the reference, reproduce B via the identity") {
    TwoLayerSetup s = make_setup(0.15, 1.0 / 15, 1.0 / 3);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame frame = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    std::vector<double> alpha = alpha_ratio(frame);
    REQUIRE(alpha.size() == frame.records.size());
    CHECK(alpha.back() == 1.0);  // reference against itself

    const FrameRecord& ref = frame.reference();
    for (std::size_t i = 0; i < frame.records.size(); ++i) {
        const FrameRecord& rec = frame.records[i];
        if (!rec.valid) {
            CHECK(std::isnan(alpha[i]));
            continue;
        }
        // B * V = U - alpha * U_ref: the two computation routes agree.
        double lhs = rec.B * rec.V;
        double rhs = rec.U - alpha[i] * ref.U;
        CHECK(std::abs(lhs - rhs) < 1e-10 * std::max(1.0, std::abs(rec.U)));
    }

    std::vector<double> plain = alpha_ratio(std::vector<double>{1.0, 2.0, 3.0}, 2.0);
    CHECK(plain == std::vector<double>{0.5, 1.0, 1.5});
    CHECK_THROWS_AS(alpha_ratio(std::vector<double>{1.0}, 0.0), Error);
}

TEST_CASE("homogeneous domain: measured voltage matches the alpha-scaled reference") {
    TwoLayerSetup s = make_setup(0.0, 2.0, 2.0);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame frame = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    std::vector<double> alpha = alpha_ratio(frame);
    const FrameRecord& ref = frame.reference();
    for (std::size_t i = 0; i < frame.records.size(); ++i) {
        const FrameRecord& rec = frame.records[i];
        if (!rec.valid || !pattern_resolvable(rec.pattern, 8)) continue;
        // U - alpha*U_ref = V*B, so the residual is bounded by the null tolerance
        // on B scaled by this record's reference voltage.
        CHECK(std::abs(rec.U - alpha[i] * ref.U) <
              2e-3 * std::abs(rec.V) / std::abs(frame.g_ref));
    }
}

TEST_CASE("noise injection: empirical level within 1 dB, seeded and deterministic") {
    TwoLayerSetup s = make_setup(0.0, 3.0, 3.0);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame clean = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    REQUIRE(count_valid(clean) >= 200);

    MeasurementFrame noisy = add_noise(clean, 15.0, 42);
    CHECK(noisy.provenance.has_noise);
    CHECK(noisy.provenance.snr_db == 15.0);
    CHECK(noisy.provenance.seed == 42);

    double signal_sq = 0.0, noise_sq = 0.0;
    int n = 0;
    for (std::size_t i = 0; i < clean.records.size(); ++i) {
        if (!clean.records[i].valid) continue;
        double u = clean.records[i].U;
        double d = noisy.records[i].U - u;
        signal_sq += u * u;
        noise_sq += d * d;
        ++n;
        CHECK(noisy.records[i].V == clean.records[i].V);  // V untouched
    }
    REQUIRE(n >= 200);
    double snr_emp = 10.0 * std::log10(signal_sq / noise_sq);
    CHECK(std::abs(snr_emp - 15.0) <= 1.0);

    // Ratios are recomputed from the perturbed voltages.
    for (std::size_t i = 0; i < clean.records.size(); ++i)
        if (noisy.records[i].valid) CHECK(noisy.records[i].G == noisy.records[i].V / noisy.records[i].U);

    // Same seed: bit-identical. Different seed: different.
    MeasurementFrame again = add_noise(clean, 15.0, 42);
    for (std::size_t i = 0; i < noisy.records.size(); ++i) {
        CHECK(again.records[i].U == noisy.records[i].U);
        CHECK(again.records[i].valid == noisy.records[i].valid);
    }
    MeasurementFrame other = add_noise(clean, 15.0, 43);
    int differing = 0;
    for (std::size_t i = 0; i < noisy.records.size(); ++i)
        if (other.records[i].valid && other.records[i].U != noisy.records[i].U) ++differing;
    CHECK(differing > 100);
}

TEST_CASE("noise flag: infinite ratio returns the frame unchanged") {
    TwoLayerSetup s = make_setup(0.0, 1.0, 1.0);
    PatternSet set = enumerate_patterns(4, 8);
    MeasurementFrame clean = simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set);
    MeasurementFrame same = add_noise(clean, std::numeric_limits<double>::infinity(), 99);
    for (std::size_t i = 0; i < clean.records.size(); ++i) {
        CHECK(same.records[i].U == clean.records[i].U);
        CHECK(same.records[i].B == clean.records[i].B);
    }
    CHECK(!same.provenance.has_noise);
    CHECK_THROWS_AS(add_noise(clean, std::numeric_limits<double>::quiet_NaN(), 1), Error);
}

TEST_CASE("degenerate records: zero reference voltage invalidates the ratio") {
    // Hand-built frame exercising the validity rules without a solver.
    MeasurementFrame frame;
    frame.n = 1;
    FrameRecord a;
    a.pattern = {1, 2, 3, 4};
    a.U = 1.0;
    a.V = 2.0;
    a.valid = true;
    FrameRecord b = a;
    b.pattern = {1, 3, 2, 4};
    b.V = 0.0;  // undefined inverse ratio
    FrameRecord ref = a;
    ref.pattern = {1, 2, 8, 3};
    ref.U = 2.0;
    ref.V = 4.0;
    ref.is_reference = true;
    frame.records = {a, b, ref};

    // Vanishing noise keeps the voltages effectively unchanged but re-runs the
    // ratio computation, which must invalidate the V = 0 record.
    MeasurementFrame out = add_noise(frame, 400.0, 7);
    CHECK(out.records[0].valid);
    CHECK(!out.records[1].valid);
    CHECK(std::isnan(out.records[1].G));
    CHECK(out.records[2].valid);
    CHECK(out.g_ref == doctest::Approx(2.0).epsilon(1e-9));

    // A frame with no valid records cannot be noise-injected.
    MeasurementFrame empty;
    FrameRecord dead = a;
    dead.valid = false;
    dead.is_reference = true;
    empty.records = {dead};
    CHECK_THROWS_AS(add_noise(empty, 15.0, 1), Error);
}

TEST_CASE("frame simulator: pattern labels outside the layout are rejected") {
    TwoLayerSetup s = make_setup(0.0, 1.0, 1.0);
    PatternSet set = enumerate_patterns(4, 32);  // labels 1..8 fit an 8-electrode layout
    CHECK_NOTHROW(simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set));
    PatternSet wide = enumerate_patterns(10, 32);  // labels 7..14 do not
    CHECK_THROWS_AS(simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, wide), Error);
}

TEST_CASE("provenance: ids bind the frame to its meshes and noise settings") {
    TwoLayerSetup s = make_setup(0.0, 1.0, 1.0);
    PatternSet set = enumerate_patterns(4, 8);
    FrameSimulator sim(s.mesh_u, s.sigma, s.mesh_v, s.electrodes);
    MeasurementFrame frame = sim.simulate(set);
    CHECK(frame.provenance.mesh_u_id == mesh_content_id(s.mesh_u));
    CHECK(frame.provenance.mesh_v_id == mesh_content_id(s.mesh_v));
    CHECK(frame.provenance.sigma_id == sigma_content_id(s.sigma));
    CHECK(frame.provenance.electrode_count == 8);
    CHECK(!frame.provenance.v_by_cem);
    CHECK(!frame.provenance.has_noise);
    CHECK(std::isinf(frame.provenance.snr_db));

    MeasurementFrame cem_frame =
        simulate_frame(s.mesh_u, s.sigma, s.mesh_v, s.electrodes, set, true);
    CHECK(cem_frame.provenance.v_by_cem);
    // The two reference models agree at the percent level on this mesh.
    CHECK(cem_frame.g_ref == doctest::Approx(frame.g_ref).epsilon(0.02));
}
