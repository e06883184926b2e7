#include "eit/data.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "eit/parallel.hpp"
#include "eit/rng.hpp"

namespace eit {

PatternSet enumerate_patterns(int n, int electrode_count) {
    require(electrode_count >= 8, ErrorKind::Config,
            "pattern enumeration needs at least 8 electrodes");
    require(n >= 1 && n <= electrode_count, ErrorKind::Config,
            "center electrode index out of range");
    auto red = [electrode_count](int x) {
        return ((x - 1) % electrode_count + electrode_count) % electrode_count + 1;
    };
    PatternSet set;
    set.n = n;
    for (int i = n - 3; i <= n + 4; ++i)
        for (int j = n - 3; j <= n + 4; ++j)
            for (int k = n - 3; k <= n + 4; ++k)
                for (int l = n - 3; l <= n + 4; ++l)
                    if (i < j && k < l && i < k && j != l)
                        set.patterns.push_back({red(i), red(j), red(k), red(l)});
    set.reference = {red(n), red(n + 1), red(n - 1), red(n + 2)};
    return set;
}

bool pattern_is_physical(const Pattern& p) {
    return p.l_plus != p.k_plus && p.l_plus != p.k_minus && p.l_minus != p.k_plus &&
           p.l_minus != p.k_minus;
}

const FrameRecord& MeasurementFrame::reference() const {
    require(!records.empty() && records.back().is_reference, ErrorKind::Internal,
            "frame has no reference record");
    return records.back();
}

namespace {

/// G, B and g_ref from the stored U and V of every record. The reference
/// record must be last. Records with U = 0 (or V = 0, which makes 1/G
/// undefined) are marked invalid and excluded.
void recompute_ratios(MeasurementFrame& frame) {
    require(!frame.records.empty() && frame.records.back().is_reference, ErrorKind::Internal,
            "frame has no reference record");
    FrameRecord& ref = frame.records.back();
    if (ref.valid && (ref.U == 0 || ref.V == 0)) ref.valid = false;
    double inv_g_ref = std::numeric_limits<double>::quiet_NaN();
    if (ref.valid) {
        ref.G = ref.V / ref.U;
        frame.g_ref = ref.G;
        inv_g_ref = 1.0 / ref.G;
    } else {
        frame.g_ref = std::numeric_limits<double>::quiet_NaN();
    }
    for (FrameRecord& rec : frame.records) {
        if (!rec.valid) continue;
        if (rec.U == 0 || rec.V == 0) {
            rec.valid = false;
            rec.G = rec.B = std::numeric_limits<double>::quiet_NaN();
            continue;
        }
        rec.G = rec.V / rec.U;
        rec.B = 1.0 / rec.G - inv_g_ref;
    }
}

}  // namespace

FrameSimulator::FrameSimulator(const Mesh& mesh_u, std::vector<double> sigma, const Mesh& mesh_v,
                               const ElectrodeConfig& electrodes, bool v_by_cem)
    : electrodes_(electrodes),
      cem_u_(mesh_u, sigma, electrodes) {
    require(static_cast<int>(mesh_u.electrode_center_node.size()) == electrodes.count() &&
                static_cast<int>(mesh_v.electrode_center_node.size()) == electrodes.count(),
            ErrorKind::DataMismatch, "meshes were generated for a different electrode layout");
    std::vector<double> unit(mesh_v.tri_count(), 1.0);
    if (v_by_cem)
        cem_v_ = std::make_unique<CemSolver>(mesh_v, unit, electrodes);
    else
        pem_v_ = std::make_unique<PemSolver>(mesh_v, unit, electrodes);
    provenance_.mesh_u_id = mesh_content_id(mesh_u);
    provenance_.mesh_v_id = mesh_content_id(mesh_v);
    provenance_.sigma_id = sigma_content_id(sigma);
    provenance_.electrodes_id = electrodes_content_id(electrodes);
    provenance_.electrode_count = electrodes.count();
    provenance_.current = electrodes.current;
    provenance_.v_by_cem = v_by_cem;
}

MeasurementFrame FrameSimulator::simulate(const PatternSet& patterns) const {
    const int nl = electrodes_.count();
    std::vector<Pattern> all = patterns.patterns;
    all.push_back(patterns.reference);
    for (const Pattern& p : all)
        for (int lab : {p.k_plus, p.k_minus, p.l_plus, p.l_minus})
            require(lab >= 1 && lab <= nl, ErrorKind::Pattern,
                    "pattern electrode label out of range for this layout");

    // one solve per distinct drive pair, reused across measurement pairs
    std::map<std::pair<int, int>, int> drive_index;
    std::vector<DrivePair> drives;
    for (const Pattern& p : all) {
        if (!pattern_is_physical(p)) continue;
        auto key = std::make_pair(p.k_plus, p.k_minus);
        if (drive_index.emplace(key, static_cast<int>(drives.size())).second)
            drives.push_back(p.drive());
    }
    std::vector<PotentialField> fields_u(drives.size());
    std::vector<PotentialField> fields_v(drives.size());
    const std::int64_t nd = static_cast<std::int64_t>(drives.size());
#pragma omp parallel for schedule(dynamic) num_threads(thread_count())
    for (std::int64_t d = 0; d < nd; ++d) {
        fields_u[d] = cem_u_.solve(drives[d]);
        fields_v[d] = pem_v_ ? pem_v_->solve(drives[d]) : cem_v_->solve(drives[d]);
    }

    MeasurementFrame frame;
    frame.n = patterns.n;
    frame.provenance = provenance_;
    frame.records.reserve(all.size());
    frame.physical_count = 0;
    for (std::size_t i = 0; i < all.size(); ++i) {
        const Pattern& p = all[i];
        FrameRecord rec;
        rec.pattern = p;
        rec.is_reference = (i + 1 == all.size());
        if (pattern_is_physical(p)) {
            if (!rec.is_reference) ++frame.physical_count;
            int d = drive_index.at({p.k_plus, p.k_minus});
            rec.U = measure(fields_u[d], p.l_plus, p.l_minus);
            rec.V = measure(fields_v[d], p.l_plus, p.l_minus);
            rec.valid = true;
        }
        frame.records.push_back(rec);
    }
    recompute_ratios(frame);
    return frame;
}

MeasurementFrame simulate_frame(const Mesh& mesh_u, const std::vector<double>& sigma,
                                const Mesh& mesh_v, const ElectrodeConfig& electrodes,
                                const PatternSet& patterns, bool v_by_cem) {
    return FrameSimulator(mesh_u, sigma, mesh_v, electrodes, v_by_cem).simulate(patterns);
}

MeasurementFrame add_noise(const MeasurementFrame& frame, double snr_db, std::uint64_t seed) {
    if (std::isinf(snr_db) && snr_db > 0) return frame;
    require(std::isfinite(snr_db), ErrorKind::Config,
            "signal-to-noise ratio must be finite (or +infinity for no noise)");
    double sum_sq = 0.0;
    std::size_t n_valid = 0;
    for (const FrameRecord& rec : frame.records) {
        if (!rec.valid) continue;
        sum_sq += rec.U * rec.U;
        ++n_valid;
    }
    require(n_valid > 0, ErrorKind::Config, "cannot add noise to a frame with no valid records");
    const double rms = std::sqrt(sum_sq / static_cast<double>(n_valid));
    const double sigma_noise = rms * std::pow(10.0, -snr_db / 20.0);

    MeasurementFrame out = frame;
    GaussianSampler rng(seed);
    for (FrameRecord& rec : out.records) {
        if (!rec.valid) continue;
        rec.U += sigma_noise * rng();
    }
    recompute_ratios(out);
    out.provenance.has_noise = true;
    out.provenance.snr_db = snr_db;
    out.provenance.seed = seed;
    return out;
}

std::vector<double> alpha_ratio(const std::vector<double>& v_values, double v_reference) {
    require(v_reference != 0 && std::isfinite(v_reference), ErrorKind::Degenerate,
            "reference voltage is zero or non-finite");
    std::vector<double> out(v_values.size());
    for (std::size_t i = 0; i < v_values.size(); ++i) out[i] = v_values[i] / v_reference;
    return out;
}

std::vector<double> alpha_ratio(const MeasurementFrame& frame) {
    const FrameRecord& ref = frame.reference();
    require(ref.valid && ref.V != 0, ErrorKind::Degenerate,
            "reference voltage is zero or invalid");
    std::vector<double> out(frame.records.size(), std::numeric_limits<double>::quiet_NaN());
    for (std::size_t i = 0; i < frame.records.size(); ++i)
        if (frame.records[i].valid) out[i] = frame.records[i].V / ref.V;
    return out;
}

}  // namespace eit
