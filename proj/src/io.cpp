#include "eit/io.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <sstream>

#include "eit/parallel.hpp"
#include "json.hpp"

namespace eit {

namespace {

using nlohmann::json;

json parse_json_file(const std::string& path) {
    std::string text = read_text_file(path);
    json j = json::parse(text, nullptr, false);
    require(!j.is_discarded(), ErrorKind::DataMismatch, path + " is not valid JSON");
    return j;
}

void check_schema(const json& j, const char* want, const std::string& path) {
    require(j.is_object() && j.contains("schema") && j["schema"].is_string(),
            ErrorKind::DataMismatch, path + " carries no schema field");
    require(j["schema"].get<std::string>() == want, ErrorKind::DataMismatch,
            path + " has unsupported schema '" + j["schema"].get<std::string>() +
                "' (expected " + want + ")");
}

/// JSON value for a double; NaN and infinities map to null.
json json_double(double v) {
    if (std::isfinite(v)) return v;
    return nullptr;
}

double double_or(const json& j, double fallback) {
    return j.is_number() ? j.get<double>() : fallback;
}

/// Splits CSV/system text into lines without the trailing newline.
std::vector<std::string> split_lines(const std::string& text) {
    std::vector<std::string> lines;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        if (nl == std::string::npos) {
            lines.push_back(text.substr(pos));
            break;
        }
        lines.push_back(text.substr(pos, nl - pos));
        pos = nl + 1;
    }
    return lines;
}

std::vector<std::string> split_fields(const std::string& line, char sep) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (true) {
        std::size_t c = line.find(sep, pos);
        if (c == std::string::npos) {
            out.push_back(line.substr(pos));
            break;
        }
        out.push_back(line.substr(pos, c - pos));
        pos = c + 1;
    }
    return out;
}

double parse_double_field(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    double v = std::strtod(begin, &end);
    require(end != begin && end == begin + s.size(), ErrorKind::DataMismatch,
            "malformed number '" + s + "' in " + context);
    return v;
}

long long parse_int_field(const std::string& s, const std::string& context) {
    const char* begin = s.c_str();
    char* end = nullptr;
    long long v = std::strtoll(begin, &end, 10);
    require(end != begin && end == begin + s.size(), ErrorKind::DataMismatch,
            "malformed integer '" + s + "' in " + context);
    return v;
}

void check_csv_schema(const std::vector<std::string>& lines, const char* want,
                      const std::string& path) {
    const std::string expect = std::string("# schema: ") + want;
    require(!lines.empty() && lines[0] == expect, ErrorKind::DataMismatch,
            path + " has a missing or unsupported schema line (expected '" + expect + "')");
}

/// Whitespace tokenizer for the system artifact.
class Tokenizer {
  public:
    Tokenizer(std::string text, std::string path)
        : text_(std::move(text)), path_(std::move(path)) {}

    std::string next() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        require(pos_ < text_.size(), ErrorKind::DataMismatch,
                path_ + " ended before all fields were read");
        std::size_t start = pos_;
        while (pos_ < text_.size() && !std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        return text_.substr(start, pos_ - start);
    }

    void expect(const std::string& word) {
        std::string got = next();
        require(got == word, ErrorKind::DataMismatch,
                path_ + ": expected '" + word + "', found '" + got + "'");
    }

    double number() { return parse_double_field(next(), path_); }
    long long integer() { return parse_int_field(next(), path_); }

  private:
    std::string text_;
    std::string path_;
    std::size_t pos_ = 0;
};

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorKind::MissingArtifact, "cannot open " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    require(!in.bad(), ErrorKind::MissingArtifact, "cannot read " + path);
    return buf.str();
}

void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorKind::Internal, "cannot open " + path + " for writing");
    out << content;
    out.flush();
    require(out.good(), ErrorKind::Internal, "write to " + path + " failed");
}

// ---------------------------------------------------------------------------
// mesh JSON

void write_mesh_json(const std::string& path, const Mesh& mesh,
                     const ElectrodeConfig& electrodes, const std::vector<double>& sigma) {
    require(sigma.empty() || sigma.size() == mesh.tri_count(), ErrorKind::DataMismatch,
            "conductivity vector does not match the mesh");
    json j;
    j["schema"] = kMeshSchema;
    json nodes = json::array();
    for (const Vec2& p : mesh.nodes) nodes.push_back({p.x, p.y});
    j["nodes"] = std::move(nodes);
    json tris = json::array();
    for (const auto& t : mesh.triangles) tris.push_back({t[0], t[1], t[2]});
    j["triangles"] = std::move(tris);
    json bedges = json::array();
    for (const auto& e : mesh.boundary_edges) bedges.push_back({e[0], e[1]});
    j["boundary_edges"] = std::move(bedges);
    json tags = json::array();
    for (RegionTag t : mesh.region) tags.push_back(region_tag_name(t));
    j["region_tags"] = std::move(tags);
    j["ring_of_tri"] = mesh.ring_of_tri;
    j["boundary_node_count"] = mesh.boundary_node_count;
    j["center_node"] = mesh.center_node;
    j["electrode_center_node"] = mesh.electrode_center_node;
    j["electrode_edges"] = mesh.electrode_edges;
    json elec;
    elec["centers"] = electrodes.centers;
    elec["half_width"] = electrodes.half_width;
    elec["contact_impedance"] = electrodes.contact_impedance;
    elec["current"] = electrodes.current;
    j["electrodes"] = std::move(elec);
    if (!sigma.empty()) j["sigma"] = sigma;
    write_text_file(path, j.dump(1) + "\n");
}

MeshArtifact read_mesh_json(const std::string& path) {
    json j = parse_json_file(path);
    check_schema(j, kMeshSchema, path);
    MeshArtifact art;
    Mesh& mesh = art.mesh;
    try {
        for (const auto& p : j.at("nodes"))
            mesh.nodes.push_back({p.at(0).get<double>(), p.at(1).get<double>()});
        for (const auto& t : j.at("triangles"))
            mesh.triangles.push_back(
                {t.at(0).get<int>(), t.at(1).get<int>(), t.at(2).get<int>()});
        for (const auto& e : j.at("boundary_edges"))
            mesh.boundary_edges.push_back({e.at(0).get<int>(), e.at(1).get<int>()});
        for (const auto& t : j.at("region_tags"))
            mesh.region.push_back(region_tag_from_name(t.get<std::string>()));
        mesh.ring_of_tri = j.at("ring_of_tri").get<std::vector<int>>();
        mesh.boundary_node_count = j.at("boundary_node_count").get<int>();
        mesh.center_node = j.at("center_node").get<int>();
        mesh.electrode_center_node = j.at("electrode_center_node").get<std::vector<int>>();
        mesh.electrode_edges =
            j.at("electrode_edges").get<std::vector<std::vector<int>>>();
        const json& elec = j.at("electrodes");
        art.electrodes.centers = elec.at("centers").get<std::vector<double>>();
        art.electrodes.half_width = elec.at("half_width").get<double>();
        art.electrodes.contact_impedance = elec.at("contact_impedance").get<double>();
        art.electrodes.current = elec.at("current").get<double>();
        if (j.contains("sigma")) art.sigma = j["sigma"].get<std::vector<double>>();
    } catch (const json::exception& e) {
        fail(ErrorKind::DataMismatch, path + ": " + e.what());
    }
    require(mesh.region.size() == mesh.tri_count() &&
                mesh.ring_of_tri.size() == mesh.tri_count(),
            ErrorKind::DataMismatch, path + ": per-triangle arrays disagree in size");
    require(art.sigma.empty() || art.sigma.size() == mesh.tri_count(),
            ErrorKind::DataMismatch, path + ": conductivity array disagrees in size");
    return art;
}

// ---------------------------------------------------------------------------
// measurement frame

void write_frame_csv(const std::string& path, const MeasurementFrame& frame) {
    std::ostringstream out;
    out << "# schema: " << kFrameSchema << "\n";
    out << "n,k_plus,k_minus,l_plus,l_minus,U,V,G,B,valid\n";
    for (const FrameRecord& r : frame.records) {
        out << frame.n << ',' << r.pattern.k_plus << ',' << r.pattern.k_minus << ','
            << r.pattern.l_plus << ',' << r.pattern.l_minus << ',' << format_double(r.U)
            << ',' << format_double(r.V) << ',' << format_double(r.G) << ','
            << format_double(r.B) << ',' << (r.valid ? 1 : 0) << "\n";
    }
    write_text_file(path, out.str());
}

void write_frame_sidecar(const std::string& path, const MeasurementFrame& frame) {
    json j;
    j["schema"] = kFrameSchema;
    j["n"] = frame.n;
    j["record_count"] = frame.records.size();
    j["physical_count"] = frame.physical_count;
    j["g_ref"] = json_double(frame.g_ref);
    json p;
    p["mesh_u_id"] = frame.provenance.mesh_u_id;
    p["mesh_v_id"] = frame.provenance.mesh_v_id;
    p["sigma_id"] = frame.provenance.sigma_id;
    p["electrodes_id"] = frame.provenance.electrodes_id;
    p["electrode_count"] = frame.provenance.electrode_count;
    p["current"] = frame.provenance.current;
    p["v_by_cem"] = frame.provenance.v_by_cem;
    p["has_noise"] = frame.provenance.has_noise;
    p["snr_db"] = json_double(frame.provenance.snr_db);
    p["seed"] = frame.provenance.seed;
    j["provenance"] = std::move(p);
    write_text_file(path, j.dump(1) + "\n");
}

MeasurementFrame read_frame(const std::string& csv_path, const std::string& sidecar_path) {
    MeasurementFrame frame;
    json j = parse_json_file(sidecar_path);
    check_schema(j, kFrameSchema, sidecar_path);
    try {
        frame.n = j.at("n").get<int>();
        frame.physical_count = j.at("physical_count").get<int>();
        frame.g_ref = double_or(j.at("g_ref"), std::numeric_limits<double>::quiet_NaN());
        const json& p = j.at("provenance");
        frame.provenance.mesh_u_id = p.at("mesh_u_id").get<std::string>();
        frame.provenance.mesh_v_id = p.at("mesh_v_id").get<std::string>();
        frame.provenance.sigma_id = p.at("sigma_id").get<std::string>();
        frame.provenance.electrodes_id = p.at("electrodes_id").get<std::string>();
        frame.provenance.electrode_count = p.at("electrode_count").get<int>();
        frame.provenance.current = p.at("current").get<double>();
        frame.provenance.v_by_cem = p.at("v_by_cem").get<bool>();
        frame.provenance.has_noise = p.at("has_noise").get<bool>();
        frame.provenance.snr_db =
            double_or(p.at("snr_db"), std::numeric_limits<double>::infinity());
        frame.provenance.seed = p.at("seed").get<std::uint64_t>();
    } catch (const json::exception& e) {
        fail(ErrorKind::DataMismatch, sidecar_path + ": " + e.what());
    }

    std::vector<std::string> lines = split_lines(read_text_file(csv_path));
    check_csv_schema(lines, kFrameSchema, csv_path);
    require(lines.size() >= 3, ErrorKind::DataMismatch, csv_path + " has no data rows");
    require(lines[1] == "n,k_plus,k_minus,l_plus,l_minus,U,V,G,B,valid",
            ErrorKind::DataMismatch, csv_path + " has an unexpected column header");
    for (std::size_t i = 2; i < lines.size(); ++i) {
        if (lines[i].empty()) continue;
        std::vector<std::string> f = split_fields(lines[i], ',');
        require(f.size() == 10, ErrorKind::DataMismatch,
                csv_path + ": wrong field count on line " + std::to_string(i + 1));
        require(parse_int_field(f[0], csv_path) == frame.n, ErrorKind::DataMismatch,
                csv_path + ": row center differs from the sidecar");
        FrameRecord r;
        r.pattern.k_plus = static_cast<int>(parse_int_field(f[1], csv_path));
        r.pattern.k_minus = static_cast<int>(parse_int_field(f[2], csv_path));
        r.pattern.l_plus = static_cast<int>(parse_int_field(f[3], csv_path));
        r.pattern.l_minus = static_cast<int>(parse_int_field(f[4], csv_path));
        r.U = parse_double_field(f[5], csv_path);
        r.V = parse_double_field(f[6], csv_path);
        r.G = parse_double_field(f[7], csv_path);
        r.B = parse_double_field(f[8], csv_path);
        r.valid = parse_int_field(f[9], csv_path) != 0;
        frame.records.push_back(r);
    }
    require(static_cast<std::size_t>(j.at("record_count").get<std::size_t>()) ==
                frame.records.size(),
            ErrorKind::DataMismatch, csv_path + " row count disagrees with the sidecar");
    frame.records.back().is_reference = true;
    return frame;
}

// ---------------------------------------------------------------------------
// reconstruction artifacts

void write_image_csv(const std::string& path, const ReconImage& image) {
    std::ostringstream out;
    out << "# schema: " << kImageSchema << "\n";
    out << "# n=" << image.n << " gamma0=" << format_double(image.gamma0)
        << " alpha=" << format_double(image.alpha) << " mesh_id=" << image.mesh_id << "\n";
    out << "element_id,kappa,gamma\n";
    for (std::size_t m = 0; m < image.elements.size(); ++m)
        out << image.elements[m] << ',' << format_double(image.kappa[m]) << ','
            << format_double(image.gamma[m]) << "\n";
    write_text_file(path, out.str());
}

void write_merged_csv(const std::string& path, const MergedImage& merged) {
    std::ostringstream out;
    out << "# schema: " << kMergedSchema << "\n";
    out << "element_id,gamma,coverage_count\n";
    for (std::size_t t = 0; t < merged.gamma.size(); ++t)
        out << t << ',' << format_double(merged.gamma[t]) << ',' << merged.coverage[t]
            << "\n";
    write_text_file(path, out.str());
}

void write_correlation_csv(const std::string& path,
                           const std::vector<CorrelationEntry>& entries) {
    std::ostringstream out;
    out << "# schema: " << kCorrelationSchema << "\n";
    out << "i,j,c\n";
    for (const CorrelationEntry& e : entries)
        out << e.i << ',' << e.j << ',' << format_double(e.c) << "\n";
    write_text_file(path, out.str());
}

void write_decay_csv(const std::string& path, const DecayDiagnostic& diagnostic) {
    std::ostringstream out;
    out << "# schema: " << kDecaySchema << "\n";
    out << "# argmax_element=" << diagnostic.argmax_element << "\n";
    out << "shell_lo,shell_hi,mean_abs_w\n";
    for (std::size_t s = 0; s < diagnostic.shell_mean.size(); ++s)
        out << format_double(diagnostic.shell_lo[s]) << ','
            << format_double(diagnostic.shell_hi[s]) << ','
            << format_double(diagnostic.shell_mean[s]) << "\n";
    write_text_file(path, out.str());
}

void write_convergence_csv(const std::string& path, const ConvergenceReport& report) {
    std::ostringstream out;
    out << "# schema: " << kConvergenceSchema << "\n";
    out << "h,error\n";
    for (std::size_t i = 0; i < report.h_values.size(); ++i)
        out << format_double(report.h_values[i]) << ','
            << format_double(report.errors[i]) << "\n";
    write_text_file(path, out.str());
}

void write_convergence_json(const std::string& path, const ConvergenceReport& report) {
    json j;
    j["schema"] = kConvergenceSchema;
    j["levels"] = report.h_values.size();
    j["exclusion_radius"] = report.exclusion_radius;
    j["fitted_rate"] = json_double(report.fitted_rate);
    if (!std::isfinite(report.fitted_rate))
        j["note"] = "rate undefined: a single level carries no rate information";
    write_text_file(path, j.dump(1) + "\n");
}

// ---------------------------------------------------------------------------
// sensitivity system

void write_system(const std::string& path, const SensitivitySystem& system) {
    std::ostringstream out;
    out << "# schema: " << kSystemSchema << "\n";
    out << "n " << system.domain.n << "\n";
    out << "depth " << format_double(system.domain.depth) << "\n";
    out << "mesh_id " << system.domain.mesh_id << "\n";
    out << "gamma0 " << format_double(system.gamma0) << "\n";
    out << "current " << format_double(system.current) << "\n";
    out << "alpha " << format_double(system.alpha) << "\n";
    out << "dropped_degenerate " << system.dropped_degenerate << "\n";
    out << "elements " << system.domain.elements.size();
    for (int e : system.domain.elements) out << ' ' << e;
    out << "\n";
    out << "rows " << system.S.rows() << "\n";
    for (Eigen::Index r = 0; r < system.S.rows(); ++r) {
        const Pattern& p = system.row_patterns[r];
        out << p.k_plus << ' ' << p.k_minus << ' ' << p.l_plus << ' ' << p.l_minus << ' '
            << format_double(system.b(r));
        for (Eigen::Index m = 0; m < system.S.cols(); ++m)
            out << ' ' << format_double(system.S(r, m));
        out << "\n";
    }
    write_text_file(path, out.str());
}

SensitivitySystem read_system(const std::string& path) {
    std::string text = read_text_file(path);
    {
        std::string first = text.substr(0, text.find('\n'));
        require(first == std::string("# schema: ") + kSystemSchema, ErrorKind::DataMismatch,
                path + " has a missing or unsupported schema line");
        text.erase(0, first.size());
    }
    Tokenizer tok(std::move(text), path);
    SensitivitySystem sys;
    tok.expect("n");
    sys.domain.n = static_cast<int>(tok.integer());
    tok.expect("depth");
    sys.domain.depth = tok.number();
    tok.expect("mesh_id");
    sys.domain.mesh_id = tok.next();
    tok.expect("gamma0");
    sys.gamma0 = tok.number();
    tok.expect("current");
    sys.current = tok.number();
    tok.expect("alpha");
    sys.alpha = tok.number();
    tok.expect("dropped_degenerate");
    sys.dropped_degenerate = static_cast<int>(tok.integer());
    tok.expect("elements");
    long long nt = tok.integer();
    require(nt >= 0, ErrorKind::DataMismatch, path + ": negative element count");
    sys.domain.elements.resize(nt);
    for (long long m = 0; m < nt; ++m)
        sys.domain.elements[m] = static_cast<int>(tok.integer());
    tok.expect("rows");
    long long rows = tok.integer();
    require(rows >= 0, ErrorKind::DataMismatch, path + ": negative row count");
    sys.S.resize(rows, nt);
    sys.b.resize(rows);
    sys.row_patterns.resize(rows);
    for (long long r = 0; r < rows; ++r) {
        Pattern& p = sys.row_patterns[r];
        p.k_plus = static_cast<int>(tok.integer());
        p.k_minus = static_cast<int>(tok.integer());
        p.l_plus = static_cast<int>(tok.integer());
        p.l_minus = static_cast<int>(tok.integer());
        sys.b(r) = tok.number();
        for (long long m = 0; m < nt; ++m) sys.S(r, m) = tok.number();
    }
    return sys;
}

// ---------------------------------------------------------------------------
// raster export

void write_raster_pgm(const std::string& path, const Mesh& mesh,
                      const std::vector<double>& element_values, double lo, double hi,
                      int width) {
    require(element_values.size() == mesh.tri_count(), ErrorKind::DataMismatch,
            "per-element value vector does not match the mesh");
    require(width >= 8, ErrorKind::Config, "raster width too small");
    require(hi > lo, ErrorKind::Config, "raster scale needs hi > lo");
    double xmin = mesh.nodes[0].x, xmax = xmin, ymin = mesh.nodes[0].y, ymax = ymin;
    for (const Vec2& p : mesh.nodes) {
        xmin = std::min(xmin, p.x);
        xmax = std::max(xmax, p.x);
        ymin = std::min(ymin, p.y);
        ymax = std::max(ymax, p.y);
    }
    const double dx = (xmax - xmin) / width;
    const int height = std::max(1, static_cast<int>(std::ceil((ymax - ymin) / dx)));
    P1Interpolator interp(mesh);
    std::vector<int> gray(static_cast<std::size_t>(width) * height, 0);
    const std::int64_t npix = static_cast<std::int64_t>(gray.size());
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (std::int64_t k = 0; k < npix; ++k) {
        int px = static_cast<int>(k % width);
        int py = static_cast<int>(k / width);
        // image row 0 is the top of the domain
        Vec2 q{xmin + (px + 0.5) * dx, ymax - (py + 0.5) * dx};
        int t = interp.find_triangle(q);
        if (t < 0) continue;
        double v = element_values[t];
        if (!std::isfinite(v)) continue;
        double f = std::clamp((v - lo) / (hi - lo), 0.0, 1.0);
        gray[k] = 1 + static_cast<int>(std::lround(254.0 * f));
    }
    std::ostringstream out;
    out << "P2\n";
    out << "# schema: " << kRasterSchema << "\n";
    out << "# scale: value " << format_double(lo) << " -> gray 1, value "
        << format_double(hi) << " -> gray 255, linear; gray 0 = outside/no value\n";
    out << width << ' ' << height << "\n255\n";
    for (int py = 0; py < height; ++py) {
        for (int px = 0; px < width; ++px) {
            out << gray[static_cast<std::size_t>(py) * width + px];
            out << (px + 1 == width ? '\n' : ' ');
        }
    }
    write_text_file(path, out.str());
}

}  // namespace eit
