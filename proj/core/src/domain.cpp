#include "mcbr/domain.hpp"

#include <algorithm>
#include <sstream>

namespace mcbr {

std::string_view code_name(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::CatalogMismatch: return "catalog_mismatch";
    case ErrorCode::Parse: return "parse_error";
    case ErrorCode::EmptyCaseBase: return "empty_case_base";
    case ErrorCode::Configuration: return "configuration_error";
    case ErrorCode::Precondition: return "precondition_failed";
    case ErrorCode::StateOrder: return "state_order";
    case ErrorCode::OutOfRange: return "out_of_range";
    case ErrorCode::Validation: return "validation_error";
    case ErrorCode::Schema: return "schema_error";
    case ErrorCode::IdCollision: return "id_collision";
    case ErrorCode::MissingFile: return "missing_file";
    case ErrorCode::Storage: return "storage_error";
    case ErrorCode::NotFound: return "not_found";
    }
    return "unknown";
}

namespace {

constexpr std::array<std::string_view, kDiagnosisCount> kDiagnosisNames = {
    "ABM",
    "AcuteViralMeningitis",
    "TuberculousMeningitis",
    "Encephalitis",
    "BrainAbscess",
    "Meningism",
    "MeningealReactionNearbyInflammation",
    "MeningealHaemorrhage",
    "BrainTumor",
};

void require_same_size(std::size_t a, std::size_t b, const char* what) {
    if (a != b) {
        std::ostringstream os;
        os << what << ": vector lengths differ (" << a << " vs " << b << ")";
        throw Error(ErrorCode::CatalogMismatch, os.str());
    }
}

} // namespace

std::string_view to_string(Diagnosis d) noexcept { return kDiagnosisNames[index_of(d)]; }

std::optional<Diagnosis> parse_diagnosis(std::string_view name) noexcept {
    for (std::size_t i = 0; i < kDiagnosisCount; ++i) {
        if (kDiagnosisNames[i] == name) return kAllDiagnoses[i];
    }
    return std::nullopt;
}

// ---------------------------------------------------------------------------
// SymptomCatalog

SymptomCatalog::SymptomCatalog(std::vector<Entry> entries) : entries_(std::move(entries)) {
    if (entries_.empty()) throw Error(ErrorCode::Validation, "symptom catalog is empty");
    for (std::uint32_t i = 0; i < entries_.size(); ++i) {
        const auto& name = entries_[i].name;
        if (name.empty()) throw Error(ErrorCode::Validation, "symptom " + std::to_string(i) + " has no name");
        if (!by_name_.emplace(name, i).second)
            throw Error(ErrorCode::Validation, "duplicate symptom name '" + name + "'");
    }
}

const std::string& SymptomCatalog::name(SymptomId id) const {
    if (id.value >= entries_.size())
        throw Error(ErrorCode::OutOfRange, "symptom id " + std::to_string(id.value) + " out of range");
    return entries_[id.value].name;
}

std::optional<SymptomId> SymptomCatalog::find(std::string_view name) const {
    auto it = by_name_.find(std::string(name));
    if (it == by_name_.end()) return std::nullopt;
    return SymptomId{it->second};
}

SymptomId SymptomCatalog::id(std::string_view name) const {
    if (auto found = find(name)) return *found;
    throw Error(ErrorCode::NotFound, "unknown symptom '" + std::string(name) + "'");
}

bool SymptomCatalog::influential(SymptomId id) const {
    if (id.value >= entries_.size())
        throw Error(ErrorCode::OutOfRange, "symptom id " + std::to_string(id.value) + " out of range");
    return entries_[id.value].influential;
}

std::vector<SymptomId> SymptomCatalog::influential_ids() const {
    std::vector<SymptomId> out;
    for (std::uint32_t i = 0; i < entries_.size(); ++i)
        if (entries_[i].influential) out.push_back(SymptomId{i});
    return out;
}

bool SymptomCatalog::has_explicit_influential() const {
    return std::any_of(entries_.begin(), entries_.end(), [](const Entry& e) { return e.influential; });
}

void SymptomCatalog::set_influential(std::span<const SymptomId> ids) {
    for (auto& e : entries_) e.influential = false;
    for (auto id : ids) {
        if (id.value >= entries_.size())
            throw Error(ErrorCode::OutOfRange, "influential symptom id " + std::to_string(id.value) + " out of range");
        entries_[id.value].influential = true;
    }
}

// ---------------------------------------------------------------------------
// SymptomVector

SymptomVector SymptomVector::with_present(std::size_t size, std::span<const SymptomId> present) {
    SymptomVector v(size);
    for (auto id : present) {
        if (id.value >= size)
            throw Error(ErrorCode::CatalogMismatch, "symptom id " + std::to_string(id.value) + " exceeds vector length");
        v.set(id);
    }
    return v;
}

std::size_t SymptomVector::count() const noexcept {
    return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), true));
}

std::vector<SymptomId> SymptomVector::present() const {
    std::vector<SymptomId> out;
    for (std::uint32_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) out.push_back(SymptomId{i});
    return out;
}

std::string SymptomVector::to_bitstring() const {
    std::string s(bits_.size(), '0');
    for (std::size_t i = 0; i < bits_.size(); ++i)
        if (bits_[i]) s[i] = '1';
    return s;
}

SymptomVector SymptomVector::from_bitstring(std::string_view bits) {
    std::vector<bool> out(bits.size());
    for (std::size_t i = 0; i < bits.size(); ++i) {
        if (bits[i] == '1') out[i] = true;
        else if (bits[i] != '0')
            throw Error(ErrorCode::Parse, "symptom bitstring has invalid character at position " + std::to_string(i));
    }
    return SymptomVector(std::move(out));
}

// ---------------------------------------------------------------------------
// Solution

Solution::Solution(Diagnosis primary, std::vector<Diagnosis> differentials)
    : primary_(primary), differentials_(std::move(differentials)) {
    if (differentials_.size() > kMaxDifferentials)
        throw Error(ErrorCode::Validation, "a solution carries at most two differential diagnoses");
    for (std::size_t i = 0; i < differentials_.size(); ++i) {
        if (differentials_[i] == primary)
            throw Error(ErrorCode::Validation, std::string(mcbr::to_string(primary)) + " is both primary and differential");
        for (std::size_t j = 0; j < i; ++j)
            if (differentials_[j] == differentials_[i])
                throw Error(ErrorCode::Validation,
                            std::string(mcbr::to_string(differentials_[i])) + " listed twice as differential");
    }
}

Solution Solution::from_parts(std::optional<Diagnosis> primary, std::vector<Diagnosis> differentials) {
    if (!primary) {
        if (!differentials.empty())
            throw Error(ErrorCode::Validation, "differentials given without a primary diagnosis");
        return Solution{};
    }
    return Solution(*primary, std::move(differentials));
}

bool Solution::contains(Diagnosis d) const noexcept {
    if (primary_ == d) return true;
    return std::find(differentials_.begin(), differentials_.end(), d) != differentials_.end();
}

std::vector<Diagnosis> Solution::ranked() const {
    std::vector<Diagnosis> out;
    if (primary_) out.push_back(*primary_);
    out.insert(out.end(), differentials_.begin(), differentials_.end());
    return out;
}

std::string Solution::to_string() const {
    if (!primary_) return {};
    std::string s(mcbr::to_string(*primary_));
    s += ';';
    for (std::size_t i = 0; i < differentials_.size(); ++i) {
        if (i) s += ',';
        s += mcbr::to_string(differentials_[i]);
    }
    return s;
}

Solution Solution::parse(std::string_view text) {
    auto trim = [](std::string_view v) {
        while (!v.empty() && v.front() == ' ') v.remove_prefix(1);
        while (!v.empty() && v.back() == ' ') v.remove_suffix(1);
        return v;
    };
    auto label = [](std::string_view v) {
        if (auto d = parse_diagnosis(v)) return *d;
        throw Error(ErrorCode::Parse, "unknown diagnosis '" + std::string(v) + "'");
    };
    text = trim(text);
    if (text.empty()) return Solution{};
    auto semi = text.find(';');
    Diagnosis primary = label(trim(text.substr(0, semi)));
    std::vector<Diagnosis> diffs;
    if (semi != std::string_view::npos) {
        std::string_view rest = text.substr(semi + 1);
        while (!rest.empty()) {
            auto comma = rest.find(',');
            auto item = trim(rest.substr(0, comma));
            if (!item.empty()) diffs.push_back(label(item));
            if (comma == std::string_view::npos) break;
            rest.remove_prefix(comma + 1);
        }
    }
    return Solution(primary, std::move(diffs));
}

// ---------------------------------------------------------------------------
// Cases

void DiagnosticCase::validate() const {
    if (success && solution.empty())
        throw Error(ErrorCode::Validation, "case " + std::to_string(id) + " is marked successful but has no solution");
}

void AdaptationCase::validate() const {
    if (s1.empty())
        throw Error(ErrorCode::Validation, "adaptation case " + std::to_string(id) + " has an empty source solution");
}

// ---------------------------------------------------------------------------
// DeltaVector

bool DeltaVector::is_null() const noexcept {
    return std::all_of(entries_.begin(), entries_.end(), [](DeltaValue v) { return v == DeltaValue::Same; });
}

DeltaVector DeltaVector::swapped() const {
    DeltaVector out(*this);
    for (auto& v : out.entries_) {
        if (v == DeltaValue::AddedInCurrent) v = DeltaValue::RemovedInCurrent;
        else if (v == DeltaValue::RemovedInCurrent) v = DeltaValue::AddedInCurrent;
    }
    return out;
}

std::string DeltaVector::to_string() const {
    std::string s(entries_.size(), '=');
    for (std::size_t i = 0; i < entries_.size(); ++i) {
        if (entries_[i] == DeltaValue::AddedInCurrent) s[i] = '+';
        else if (entries_[i] == DeltaValue::RemovedInCurrent) s[i] = '-';
    }
    return s;
}

DeltaVector DeltaVector::parse(std::string_view text) {
    std::vector<DeltaValue> out(text.size());
    for (std::size_t i = 0; i < text.size(); ++i) {
        switch (text[i]) {
        case '=': out[i] = DeltaValue::Same; break;
        case '+': out[i] = DeltaValue::AddedInCurrent; break;
        case '-': out[i] = DeltaValue::RemovedInCurrent; break;
        default:
            throw Error(ErrorCode::Parse, "delta string has invalid character at position " + std::to_string(i));
        }
    }
    return DeltaVector(std::move(out));
}

// ---------------------------------------------------------------------------
// Primitives

std::size_t hamming(const SymptomVector& a, const SymptomVector& b) {
    require_same_size(a.size(), b.size(), "hamming");
    std::size_t diff = 0;
    for (std::uint32_t i = 0; i < a.size(); ++i)
        if (a.test(SymptomId{i}) != b.test(SymptomId{i})) ++diff;
    return diff;
}

double similarity(const SymptomVector& a, const SymptomVector& b) {
    require_same_size(a.size(), b.size(), "similarity");
    if (a.size() == 0) return 1.0;
    const std::size_t agree = a.size() - hamming(a, b);
    return static_cast<double>(agree) / static_cast<double>(a.size());
}

DeltaVector delta(const SymptomVector& current, const SymptomVector& retrieved) {
    require_same_size(current.size(), retrieved.size(), "delta");
    DeltaVector out(current.size());
    for (std::uint32_t i = 0; i < current.size(); ++i) {
        const SymptomId id{i};
        const bool c = current.test(id);
        const bool r = retrieved.test(id);
        if (c && !r) out.set(id, DeltaValue::AddedInCurrent);
        else if (!c && r) out.set(id, DeltaValue::RemovedInCurrent);
    }
    return out;
}

SymptomVector apply_delta(const SymptomVector& retrieved, const DeltaVector& d) {
    require_same_size(retrieved.size(), d.size(), "apply_delta");
    SymptomVector out = retrieved;
    for (std::uint32_t i = 0; i < d.size(); ++i) {
        const SymptomId id{i};
        switch (d.at(id)) {
        case DeltaValue::Same: break;
        case DeltaValue::AddedInCurrent: out.set(id, true); break;
        case DeltaValue::RemovedInCurrent: out.set(id, false); break;
        }
    }
    return out;
}

} // namespace mcbr
