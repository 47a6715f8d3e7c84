#include "mcbr/rules.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace mcbr {

std::string_view to_string(Role r) noexcept { return r == Role::Primary ? "primary" : "differential"; }

std::string_view to_string(ActionKind k) noexcept {
    switch (k) {
    case ActionKind::AssertPrimary: return "primary";
    case ActionKind::AssertDifferential: return "differential";
    case ActionKind::Discard: return "discard";
    case ActionKind::Demote: return "demote";
    case ActionKind::Promote: return "promote";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Rule / RuleBase

void Rule::validate() const {
    if (id.empty()) throw Error(ErrorCode::Validation, "rule without id");
    if (conditions.empty()) throw Error(ErrorCode::Validation, "rule '" + id + "' has no conditions");
    if (actions.empty()) throw Error(ErrorCode::Validation, "rule '" + id + "' has no actions");
    for (const auto& c : conditions) {
        const bool symptom_test = std::holds_alternative<SymptomPresent>(c.pattern);
        const bool adapt_test = std::holds_alternative<DeltaIs>(c.pattern) || std::holds_alternative<HasRole>(c.pattern);
        if (kind == RuleKind::PreDiagnosis && !symptom_test)
            throw Error(ErrorCode::Validation, "pre-diagnosis rule '" + id + "' may only test symptom presence");
        if (kind == RuleKind::Adaptation && !adapt_test)
            throw Error(ErrorCode::Validation, "adaptation rule '" + id + "' may only test deltas and roles");
        if (auto* d = std::get_if<DeltaIs>(&c.pattern); d && d->change == DeltaValue::Same)
            throw Error(ErrorCode::Validation, "rule '" + id + "' tests an unchanged symptom");
    }
    if (kind == RuleKind::PreDiagnosis) {
        for (const auto& a : actions)
            if (a.kind != ActionKind::AssertPrimary && a.kind != ActionKind::AssertDifferential)
                throw Error(ErrorCode::Validation, "pre-diagnosis rule '" + id + "' may only assert diagnoses");
    }
}

RuleBase::RuleBase(std::vector<Rule> rules) {
    for (auto& r : rules) add(std::move(r));
}

void RuleBase::add(Rule rule) {
    rule.validate();
    for (const auto& r : rules_)
        if (r.id == rule.id) throw Error(ErrorCode::Validation, "duplicate rule id '" + rule.id + "'");
    if (!rules_.empty() && rule.order <= rules_.back().order) rule.order = rules_.back().order + 1;
    rules_.push_back(std::move(rule));
}

void RuleBase::merge(const RuleBase& other) {
    for (const auto& r : other.rules_) add(r);
}

std::size_t RuleBase::count(RuleKind kind) const noexcept {
    return static_cast<std::size_t>(
        std::count_if(rules_.begin(), rules_.end(), [kind](const Rule& r) { return r.kind == kind; }));
}

std::vector<SymptomId> RuleBase::referenced_symptoms() const {
    std::set<SymptomId> ids;
    for (const auto& r : rules_) {
        if (r.kind != RuleKind::Adaptation) continue;
        for (const auto& c : r.conditions)
            if (auto* d = std::get_if<DeltaIs>(&c.pattern)) ids.insert(d->symptom);
    }
    return {ids.begin(), ids.end()};
}

// ---------------------------------------------------------------------------
// WorkingMemory

WorkingMemory WorkingMemory::from_symptoms(const SymptomVector& symptoms) {
    WorkingMemory m;
    for (auto id : symptoms.present()) m.present_.insert(id);
    return m;
}

WorkingMemory WorkingMemory::for_adaptation(const DeltaVector& d, const Solution& s1) {
    WorkingMemory m;
    for (std::uint32_t i = 0; i < d.size(); ++i) {
        const SymptomId id{i};
        if (d.at(id) != DeltaValue::Same) m.deltas_.insert(DeltaIs{id, d.at(id)});
    }
    m.primary_ = s1.primary();
    m.differentials_ = s1.differentials();
    return m;
}

void WorkingMemory::insert(const Fact& fact) {
    auto has_role = [this](Diagnosis d) {
        return primary_ == d || std::find(differentials_.begin(), differentials_.end(), d) != differentials_.end();
    };
    std::visit(
        [&](const auto& f) {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, SymptomPresent>) {
                present_.insert(f.symptom);
            } else if constexpr (std::is_same_v<T, DeltaIs>) {
                if (f.change == DeltaValue::Same)
                    throw Error(ErrorCode::Precondition, "unchanged symptoms are not working-memory facts");
                deltas_.insert(f);
            } else if constexpr (std::is_same_v<T, HasRole>) {
                if (discarded(f.diagnosis))
                    throw Error(ErrorCode::Precondition, std::string(to_string(f.diagnosis)) + " is discarded");
                if (contains(fact)) return;
                if (has_role(f.diagnosis))
                    throw Error(ErrorCode::Precondition,
                                std::string(to_string(f.diagnosis)) + " already holds the other role");
                if (f.role == Role::Primary) {
                    if (primary_) throw Error(ErrorCode::Precondition, "working memory already has a primary");
                    primary_ = f.diagnosis;
                } else {
                    differentials_.push_back(f.diagnosis);
                }
            } else {
                if (has_role(f.diagnosis))
                    throw Error(ErrorCode::Precondition,
                                std::string(to_string(f.diagnosis)) + " holds a role and cannot be discarded");
                discarded_[index_of(f.diagnosis)] = true;
            }
        },
        fact);
}

bool WorkingMemory::contains(const Fact& fact) const {
    return std::visit(
        [this](const auto& f) -> bool {
            using T = std::decay_t<decltype(f)>;
            if constexpr (std::is_same_v<T, SymptomPresent>) {
                return present_.count(f.symptom) > 0;
            } else if constexpr (std::is_same_v<T, DeltaIs>) {
                return deltas_.count(f) > 0;
            } else if constexpr (std::is_same_v<T, HasRole>) {
                if (f.role == Role::Primary) return primary_ == f.diagnosis;
                return std::find(differentials_.begin(), differentials_.end(), f.diagnosis) != differentials_.end();
            } else {
                return discarded(f.diagnosis);
            }
        },
        fact);
}

std::vector<Fact> WorkingMemory::facts() const {
    std::vector<Fact> out;
    for (auto id : present_) out.emplace_back(SymptomPresent{id});
    for (const auto& d : deltas_) out.emplace_back(d);
    if (primary_) out.emplace_back(HasRole{*primary_, Role::Primary});
    for (auto d : differentials_) out.emplace_back(HasRole{d, Role::Differential});
    for (auto d : kAllDiagnoses)
        if (discarded(d)) out.emplace_back(Discarded{d});
    std::sort(out.begin(), out.end());
    return out;
}

std::size_t WorkingMemory::size() const {
    return present_.size() + deltas_.size() + (primary_ ? 1 : 0) + differentials_.size() +
           static_cast<std::size_t>(std::count(discarded_.begin(), discarded_.end(), true));
}

void WorkingMemory::demote_primary_into_differentials() {
    differentials_.push_back(*primary_);
    primary_.reset();
}

ActionOutcome WorkingMemory::apply(const Action& action) {
    const Diagnosis d = action.target;
    auto skipped = [](std::string note) { return ActionOutcome{ActionStatus::Skipped, std::nullopt, std::move(note)}; };
    auto diff_it = std::find(differentials_.begin(), differentials_.end(), d);
    const bool is_differential = diff_it != differentials_.end();

    switch (action.kind) {
    case ActionKind::AssertPrimary: {
        if (discarded(d)) return skipped("discarded");
        if (primary_ == d) return skipped("already primary");
        if (is_differential) differentials_.erase(diff_it);
        ActionOutcome out;
        if (primary_) {
            out.displaced = primary_;
            out.note = "previous primary demoted";
            demote_primary_into_differentials();
        }
        primary_ = d;
        return out;
    }
    case ActionKind::AssertDifferential:
        if (discarded(d)) return skipped("discarded");
        if (primary_ == d) return skipped("already primary");
        if (is_differential) return skipped("already differential");
        if (differentials_.size() >= Solution::kMaxDifferentials) return skipped("differential capacity reached");
        differentials_.push_back(d);
        return {};
    case ActionKind::Discard:
        if (discarded(d)) return skipped("already discarded");
        if (primary_ == d) primary_.reset();
        if (is_differential) differentials_.erase(diff_it);
        discarded_[index_of(d)] = true;
        return {};
    case ActionKind::Demote:
        if (primary_ != d) return skipped("not primary");
        demote_primary_into_differentials();
        return {};
    case ActionKind::Promote: {
        if (!is_differential) return skipped("not differential");
        differentials_.erase(diff_it);
        ActionOutcome out;
        if (primary_) {
            out.displaced = primary_;
            out.note = "previous primary demoted";
            demote_primary_into_differentials();
        }
        primary_ = d;
        return out;
    }
    }
    return skipped("unknown action");
}

void WorkingMemory::check_invariants() const {
    std::array<int, kDiagnosisCount> roles{};
    if (primary_) ++roles[index_of(*primary_)];
    for (auto d : differentials_) ++roles[index_of(d)];
    for (auto d : kAllDiagnoses) {
        if (roles[index_of(d)] > 1)
            throw Error(ErrorCode::Validation, std::string(to_string(d)) + " holds more than one role");
        if (roles[index_of(d)] > 0 && discarded(d))
            throw Error(ErrorCode::Validation, std::string(to_string(d)) + " is discarded but holds a role");
    }
    for (const auto& f : deltas_)
        if (f.change == DeltaValue::Same) throw Error(ErrorCode::Validation, "Same delta stored as a fact");
}

// ---------------------------------------------------------------------------
// Inference

bool rule_enabled(const Rule& rule, const WorkingMemory& current, const WorkingMemory& seed) {
    return std::all_of(rule.conditions.begin(), rule.conditions.end(), [&](const Condition& c) {
        return c.negated ? !seed.contains(c.pattern) : current.contains(c.pattern);
    });
}

InferenceResult infer(const RuleBase& rules, WorkingMemory memory, std::optional<RuleKind> only) {
    const WorkingMemory seed = memory;
    const auto& list = rules.rules();
    std::vector<bool> fired(list.size(), false);
    InferenceResult result;

    for (;;) {
        bool progressed = false;
        for (std::size_t i = 0; i < list.size(); ++i) {
            const Rule& rule = list[i];
            if (fired[i] || (only && rule.kind != *only)) continue;
            if (!rule_enabled(rule, memory, seed)) continue;
            fired[i] = true;
            result.fired.push_back(rule.id);
            for (const auto& action : rule.actions) {
                ActionOutcome outcome = memory.apply(action);
                result.trace.push_back(
                    TraceEntry{rule.id, action, outcome.status, outcome.displaced, std::move(outcome.note)});
            }
            progressed = true;
            break;
        }
        if (!progressed) break;
    }
    result.memory = std::move(memory);
    return result;
}

PreDiagnosisResult prediagnose(const RuleBase& rules, const SymptomVector& symptoms) {
    InferenceResult run = infer(rules, WorkingMemory::from_symptoms(symptoms), RuleKind::PreDiagnosis);
    PreDiagnosisResult out;
    for (const auto& entry : run.trace) {
        if (entry.action.kind != ActionKind::AssertPrimary) continue;
        const auto& seen = out.asserted_primaries;
        if (std::find(seen.begin(), seen.end(), entry.action.target) == seen.end())
            out.asserted_primaries.push_back(entry.action.target);
    }
    if (!run.fired.empty() && out.asserted_primaries.size() == 1 && run.memory.primary()) {
        std::vector<Diagnosis> diffs = run.memory.differentials();
        if (diffs.size() > Solution::kMaxDifferentials) diffs.resize(Solution::kMaxDifferentials);
        out.solution = Solution(*run.memory.primary(), std::move(diffs));
    }
    out.trace = std::move(run.trace);
    out.fired = std::move(run.fired);
    return out;
}

// ---------------------------------------------------------------------------
// DSL

namespace {

struct Token {
    enum Kind { Ident, LParen, RParen, Comma, Colon, End } kind;
    std::string text;
};

bool ident_char(char c) {
    return std::isalnum(static_cast<unsigned char>(c)) || c == '_' || c == '-' || c == '.';
}

std::string upper(std::string s) {
    for (auto& c : s) c = static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    return s;
}

class LineParser {
public:
    LineParser(std::string_view line, std::size_t line_no, const SymptomCatalog& catalog)
        : line_no_(line_no), catalog_(catalog) {
        tokenize(line);
    }

    bool blank() const { return tokens_.size() == 1; }

    Rule parse(std::string default_id) {
        Rule rule;
        if (peek().kind == Token::Ident && tokens_.size() > 1 && tokens_[1].kind == Token::Colon) {
            rule.id = next().text;
            next();
        } else {
            rule.id = std::move(default_id);
        }
        const std::string kind = upper(expect_ident("rule kind"));
        if (kind == "PREDIAG") rule.kind = RuleKind::PreDiagnosis;
        else if (kind == "ADAPT") rule.kind = RuleKind::Adaptation;
        else fail("expected PREDIAG or ADAPT, got '" + kind + "'");
        if (upper(expect_ident("IF")) != "IF") fail("expected IF");

        for (;;) {
            rule.conditions.push_back(condition(rule.kind));
            const std::string kw = upper(expect_ident("AND or THEN"));
            if (kw == "THEN") break;
            if (kw != "AND") fail("expected AND or THEN, got '" + kw + "'");
        }
        for (;;) {
            rule.actions.push_back(action(rule.kind));
            if (peek().kind == Token::End) break;
            if (upper(expect_ident("AND")) != "AND") fail("expected AND between actions");
        }
        return rule;
    }

private:
    [[noreturn]] void fail(const std::string& what) const {
        throw Error(ErrorCode::Parse, "line " + std::to_string(line_no_) + ": " + what, line_no_);
    }

    void tokenize(std::string_view line) {
        std::size_t i = 0;
        while (i < line.size()) {
            const char c = line[i];
            if (c == '#') break;
            if (std::isspace(static_cast<unsigned char>(c))) { ++i; continue; }
            if (c == '(') { tokens_.push_back({Token::LParen, "("}); ++i; continue; }
            if (c == ')') { tokens_.push_back({Token::RParen, ")"}); ++i; continue; }
            if (c == ',') { tokens_.push_back({Token::Comma, ","}); ++i; continue; }
            if (c == ':') { tokens_.push_back({Token::Colon, ":"}); ++i; continue; }
            if (ident_char(c)) {
                std::size_t j = i;
                while (j < line.size() && ident_char(line[j])) ++j;
                tokens_.push_back({Token::Ident, std::string(line.substr(i, j - i))});
                i = j;
                continue;
            }
            fail(std::string("unexpected character '") + c + "'");
        }
        tokens_.push_back({Token::End, ""});
    }

    const Token& peek() const { return tokens_[pos_]; }
    const Token& next() {
        const Token& t = tokens_[pos_];
        if (t.kind != Token::End) ++pos_;
        return t;
    }
    std::string expect_ident(const char* what) {
        const Token& t = next();
        if (t.kind != Token::Ident) fail(std::string("expected ") + what);
        return t.text;
    }
    void expect(Token::Kind kind, const char* what) {
        if (next().kind != kind) fail(std::string("expected '") + what + "'");
    }

    SymptomId symptom(const std::string& name) const {
        if (auto id = catalog_.find(name)) return *id;
        fail("unknown symptom '" + name + "'");
    }
    Diagnosis diagnosis(const std::string& name) const {
        if (auto d = parse_diagnosis(name)) return *d;
        fail("unknown diagnosis '" + name + "'");
    }

    Condition condition(RuleKind kind) {
        Condition c;
        std::string pred = expect_ident("condition");
        if (pred == "not") {
            c.negated = true;
            pred = expect_ident("condition after 'not'");
        }
        expect(Token::LParen, "(");
        if (pred == "present" || pred == "absent") {
            if (kind != RuleKind::PreDiagnosis) fail("adaptation rules test added/removed/role, not " + pred);
            c.pattern = SymptomPresent{symptom(expect_ident("symptom"))};
            if (pred == "absent") c.negated = !c.negated;
        } else if (pred == "added" || pred == "removed") {
            if (kind != RuleKind::Adaptation) fail("pre-diagnosis rules may only test present/absent");
            c.pattern = DeltaIs{symptom(expect_ident("symptom")),
                                pred == "added" ? DeltaValue::AddedInCurrent : DeltaValue::RemovedInCurrent};
        } else if (pred == "role") {
            if (kind != RuleKind::Adaptation) fail("pre-diagnosis rules may only test present/absent");
            const Diagnosis d = diagnosis(expect_ident("diagnosis"));
            expect(Token::Comma, ",");
            const std::string role = expect_ident("role");
            if (role == "primary") c.pattern = HasRole{d, Role::Primary};
            else if (role == "differential") c.pattern = HasRole{d, Role::Differential};
            else fail("role must be primary or differential, got '" + role + "'");
        } else {
            fail("unknown condition '" + pred + "'");
        }
        expect(Token::RParen, ")");
        return c;
    }

    Action action(RuleKind kind) {
        const std::string name = expect_ident("action");
        Action a{};
        if (name == "primary") a.kind = ActionKind::AssertPrimary;
        else if (name == "differential") a.kind = ActionKind::AssertDifferential;
        else if (name == "discard") a.kind = ActionKind::Discard;
        else if (name == "demote") a.kind = ActionKind::Demote;
        else if (name == "promote") a.kind = ActionKind::Promote;
        else fail("unknown action '" + name + "'");
        if (kind == RuleKind::PreDiagnosis && a.kind != ActionKind::AssertPrimary &&
            a.kind != ActionKind::AssertDifferential)
            fail("pre-diagnosis rules may only use primary() or differential()");
        expect(Token::LParen, "(");
        a.target = diagnosis(expect_ident("diagnosis"));
        expect(Token::RParen, ")");
        return a;
    }

    std::size_t line_no_;
    const SymptomCatalog& catalog_;
    std::vector<Token> tokens_;
    std::size_t pos_ = 0;
};

} // namespace

RuleBase parse_rules(std::string_view text, const SymptomCatalog& catalog, std::string_view source) {
    RuleBase base;
    std::size_t line_no = 0;
    while (!text.empty() || line_no == 0) {
        ++line_no;
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        LineParser parser(line, line_no, catalog);
        if (!parser.blank()) {
            Rule rule = parser.parse(std::string(source) + "." + std::to_string(line_no));
            rule.order = static_cast<int>(line_no);
            for (const auto& r : base.rules())
                if (r.id == rule.id)
                    throw Error(ErrorCode::Parse,
                                "line " + std::to_string(line_no) + ": duplicate rule id '" + rule.id + "'", line_no);
            base.add(std::move(rule));
        }
        if (text.empty()) break;
    }
    return base;
}

std::string format_rules(const RuleBase& rules, const SymptomCatalog& catalog) {
    std::ostringstream os;
    for (const auto& r : rules.rules()) {
        os << r.id << ": " << (r.kind == RuleKind::PreDiagnosis ? "PREDIAG" : "ADAPT") << " IF ";
        for (std::size_t i = 0; i < r.conditions.size(); ++i) {
            const auto& c = r.conditions[i];
            if (i) os << " AND ";
            if (c.negated) os << "not ";
            if (auto* p = std::get_if<SymptomPresent>(&c.pattern)) {
                os << "present(" << catalog.name(p->symptom) << ")";
            } else if (auto* d = std::get_if<DeltaIs>(&c.pattern)) {
                os << (d->change == DeltaValue::AddedInCurrent ? "added(" : "removed(") << catalog.name(d->symptom)
                   << ")";
            } else if (auto* h = std::get_if<HasRole>(&c.pattern)) {
                os << "role(" << to_string(h->diagnosis) << "," << to_string(h->role) << ")";
            }
        }
        os << " THEN ";
        for (std::size_t i = 0; i < r.actions.size(); ++i) {
            if (i) os << " AND ";
            os << to_string(r.actions[i].kind) << "(" << to_string(r.actions[i].target) << ")";
        }
        os << "\n";
    }
    return os.str();
}

} // namespace mcbr
