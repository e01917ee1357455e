#pragma once

// Experiment runner: study configs, ratio reports and their JSON/CSV emission.

#include <cstdint>
#include <json.hpp>
#include <limits>
#include <string>
#include <vector>

#include "chg/fields.hpp"

namespace chg {

inline constexpr const char* kReportSchema = "chg-report/1";
inline constexpr const char* kLibraryVersion = "0.1.0";

enum class StudyId {
    kernel_verify,
    besov_equiv,
    poisson_equiv,
    square_sobolev,
    bmo_carleson,
    integral_ineq,
    commutator_lp,
    commutator_pairing,
    chanillo
};
std::string to_string(StudyId s);
StudyId study_id_from_string(const std::string& s);

/// Parameter lists. Cases are the Cartesian product of the lists a study reads, except that
/// (p1, p2, p3) are zipped in integral_ineq and commutator_lp's split form, and (s, p, r) in chanillo.
struct StudyParams {
    std::vector<double> s = {0.5}, alpha = {0.5}, p = {2}, q = {2}, lambda = {0.5, 1, 2};
    std::vector<std::string> variants;  ///< empty: the study's default set
    std::vector<double> s1 = {0.3}, s2 = {0.3}, s3 = {0};
    std::vector<double> p1 = {3}, p2 = {3}, p3 = {3}, r = {2};
    std::vector<double> alpha1 = {0.25};  ///< commutator_lp split form: α = α1 + α2
};

struct StudyTolerances {
    double drift = 0.05;  ///< bound on max/min − 1 of the ratio within a family (rows across λ)
    double ratio_min = 0;
    double ratio_max = std::numeric_limits<double>::infinity();
};

struct KernelStudy {
    std::string kind = "heat";
    std::string backend;  ///< empty: the group's default backend
    double alpha = 0.5;
    std::vector<std::string> checks = {"mass", "homogeneity", "symmetry"};
};

struct StudyConfig {
    StudyId study = StudyId::besov_equiv;
    std::string group = "R1";
    GridSpec grid;                         ///< defaults to GridSpec::standard(group)
    std::string panel = "reduced";         ///< "reduced", "full" or "custom"
    std::vector<FieldFunction> panel_functions;    ///< custom panel
    std::vector<FieldFunction> pairing_functions;  ///< empty: bmo_pairing_panel
    std::string dilation = "lattice";      ///< "lattice": f∘δ_λ on the dilated lattice; "function": same lattice
    StudyParams params;
    KernelStudy kernel;
    std::uint64_t seed = 0;
    StudyTolerances tolerances;
    double tol_scale = 1;
    int threads = 1;
    std::string output_dir = ".";
    std::string output_format = "json";

    /// Rejects unknown keys at every level and then calls validate().
    static StudyConfig from_json(const nlohmann::json& j);
    nlohmann::json to_json() const;
    /// Hypothesis gating: throws a domain error naming the violated range.
    void validate() const;

    std::vector<FieldFunction> panel_set() const;
    std::vector<FieldFunction> pairing_set() const;
};

struct ReportRow {
    std::string case_id, family;
    double lambda = 1;
    nlohmann::json inputs = nlohmann::json::object();
    std::string kind = "ratio";  ///< "ratio", "null" (lhs must vanish) or "check"
    double lhs = 0, rhs = 0, ratio = 0;
    /// ratio rows: absolute error bound on ratio; null rows: bound on |lhs|; check rows: residual.
    double error_budget = 0;
    bool passed = false;
    std::string status = "ok";  ///< "ok" or "error"
    std::string message;
};

struct ReportCheck {
    std::string name;
    double value = 0, limit = 0;
    bool passed = false;
};

struct RatioReport {
    StudyId study = StudyId::besov_equiv;
    nlohmann::json config = nlohmann::json::object();
    std::vector<ReportRow> rows;
    double ratio_min = 0, ratio_max = 0, spread = 0, dilation_drift = 0;
    std::vector<ReportCheck> checks;
    bool passed = false;
    nlohmann::json environment = nlohmann::json::object();

    nlohmann::json to_json() const;
    static RatioReport from_json(const nlohmann::json& j);
    std::vector<const ReportRow*> failing_rows() const;
};

/// Fills aggregates, per-row pass flags, checks and the overall flag from the rows.
void finalize_report(RatioReport& rep, const StudyConfig& cfg);

RatioReport run_study(const StudyConfig& cfg);

/// Writes <dir>/<study>.json or <dir>/<study>.csv and returns the path.
std::string emit_report(const RatioReport& rep, const std::string& format, const std::string& dir);
std::string report_csv(const RatioReport& rep);

}  // namespace chg
