#include "mcbr/retrieval.hpp"

#include <algorithm>

namespace mcbr {

void CaseBase::insert(DiagnosticCase c) {
    if (c.description.size() != catalog_size_)
        throw Error(ErrorCode::CatalogMismatch, "case " + std::to_string(c.id) + " has " +
                                                    std::to_string(c.description.size()) + " symptoms, catalog has " +
                                                    std::to_string(catalog_size_));
    c.validate();
    if (cases_.count(c.id)) throw Error(ErrorCode::IdCollision, "case id " + std::to_string(c.id) + " already exists");
    const CaseId id = c.id;
    cases_.emplace(id, std::move(c));
}

CaseId CaseBase::next_id() const noexcept { return cases_.empty() ? 1 : cases_.rbegin()->first + 1; }

CaseId CaseBase::add(SymptomVector description, Solution solution, bool success) {
    DiagnosticCase c{next_id(), std::move(description), std::move(solution), success};
    const CaseId id = c.id;
    insert(std::move(c));
    return id;
}

const DiagnosticCase* CaseBase::find(CaseId id) const {
    auto it = cases_.find(id);
    return it == cases_.end() ? nullptr : &it->second;
}

const DiagnosticCase& CaseBase::at(CaseId id) const {
    if (const auto* c = find(id)) return *c;
    throw Error(ErrorCode::NotFound, "no case with id " + std::to_string(id));
}

bool CaseBase::erase(CaseId id) { return cases_.erase(id) > 0; }

RetrievalResult retrieve(const CaseBase& base, const SymptomVector& query, const RetrievalOptions& options) {
    if (query.size() != base.catalog_size())
        throw Error(ErrorCode::CatalogMismatch, "query has " + std::to_string(query.size()) +
                                                    " symptoms, case base expects " +
                                                    std::to_string(base.catalog_size()));
    if (options.k == 0) throw Error(ErrorCode::Configuration, "retrieval k must be positive");

    std::vector<ScoredCase> scored;
    scored.reserve(base.size());
    for (const auto& [id, c] : base.cases()) {
        if (!c.success && !options.include_failed) continue;
        scored.push_back({id, similarity(query, c.description)});
    }
    if (scored.empty()) throw Error(ErrorCode::EmptyCaseBase, "case base has no retrievable cases");

    auto better = [](const ScoredCase& a, const ScoredCase& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.case_id < b.case_id;
    };
    const std::size_t keep = std::min(options.k, scored.size());
    std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(keep), scored.end(), better);
    scored.resize(keep);
    return RetrievalResult{std::move(scored), options.k};
}

} // namespace mcbr
