#include "policycheck/model.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include <json.hpp>

namespace policycheck::model {

using nlohmann::json;

logic::SymbolTable PolicyModel::env() const {
    logic::SymbolTable t;
    for (const auto& d : datatypes) t.add_datatype(d);
    for (const auto& v : variables) t.add_const(v.name, v.sort);
    return t;
}

const Rule* PolicyModel::find_rule(const std::string& id) const {
    for (const auto& r : rules)
        if (r.id == id) return &r;
    return nullptr;
}

void validate(const PolicyModel& m) {
    logic::SymbolTable env;
    try {
        env = m.env();
    } catch (const logic::LogicError& e) {
        throw ModelError(e.what());
    }
    for (const auto& v : m.variables)
        if (v.description.empty())
            throw ModelError("variable '" + v.name + "' has no description");
    std::set<std::string> ids, printed;
    for (const auto& r : m.rules) {
        if (r.id.empty()) throw ModelError("rule with empty id");
        if (!ids.insert(r.id).second) throw ModelError("duplicate rule id '" + r.id + "'");
        if (r.term->sort.kind != logic::SortKind::Bool)
            throw ModelError("rule '" + r.id + "' is not Bool-sorted");
        for (const auto& v : logic::free_vars(r.term))
            if (!env.consts.count(v))
                throw ModelError("rule '" + r.id + "' uses undeclared variable '" + v + "'");
        if (!printed.insert(logic::print_term(r.term)).second)
            throw ModelError("rule '" + r.id + "' duplicates another rule");
    }
}

logic::Term rename_vars(const logic::Term& t,
                        const std::map<std::string, std::string>& renaming) {
    using namespace logic;
    switch (t->kind) {
        case NodeKind::Var: {
            auto it = renaming.find(t->name);
            return it == renaming.end() ? t : mk_var(it->second, t->sort);
        }
        case NodeKind::Ctor:
        case NodeKind::BoolLit:
        case NodeKind::IntLit:
        case NodeKind::RealLit:
            return t;
        default: {
            std::vector<Term> args;
            args.reserve(t->args.size());
            for (const auto& a : t->args) args.push_back(rename_vars(a, renaming));
            switch (t->kind) {
                case NodeKind::And: return mk_and(std::move(args));
                case NodeKind::Or: return mk_or(std::move(args));
                case NodeKind::Not: return mk_not(std::move(args[0]));
                case NodeKind::Implies: return mk_implies(std::move(args[0]), std::move(args[1]));
                case NodeKind::Op: return mk_op(t->op, std::move(args[0]), std::move(args[1]));
                default: return t;
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Lexical embedder

std::vector<std::string> LexicalEmbedder::tokens(const VariableSpec& v) {
    std::vector<std::string> out;
    // camelCase / snake_case split of the name
    std::string cur;
    auto flush = [&] {
        if (!cur.empty()) {
            out.push_back(cur);
            cur.clear();
        }
    };
    for (char c : v.name) {
        if (c == '_') {
            flush();
        } else if (std::isupper(static_cast<unsigned char>(c))) {
            flush();
            cur += static_cast<char>(std::tolower(c));
        } else {
            cur += c;
        }
    }
    flush();
    // description words
    for (char c : v.description) {
        if (std::isalnum(static_cast<unsigned char>(c)))
            cur += static_cast<char>(std::tolower(c));
        else
            flush();
    }
    flush();
    return out;
}

double LexicalEmbedder::similarity(const VariableSpec& a, const VariableSpec& b) const {
    auto ta = tokens(a), tb = tokens(b);
    std::set<std::string> sa(ta.begin(), ta.end()), sb(tb.begin(), tb.end());
    if (sa.empty() && sb.empty()) return 1.0;
    size_t inter = 0;
    for (const auto& t : sa) inter += sb.count(t);
    size_t uni = sa.size() + sb.size() - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

// ---------------------------------------------------------------------------
// Composition

namespace {

struct UnitVar {
    size_t unit;
    VariableSpec spec;
};

size_t find_root(std::vector<size_t>& parent, size_t i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
}

}  // namespace

ComposeResult compose(const std::vector<PolicyUnit>& units, const EmbeddingProvider& embedder,
                      double cluster_threshold) {
    if (cluster_threshold <= 0.0 || cluster_threshold > 1.0)
        throw ModelError("cluster_threshold must be in (0,1]");
    for (const auto& u : units) validate(u);

    ComposeResult result;
    PolicyModel& out = result.model;

    // Datatypes merge by name; constructor lists must agree.
    for (const auto& u : units) {
        for (const auto& d : u.datatypes) {
            auto it = std::find_if(out.datatypes.begin(), out.datatypes.end(),
                                   [&](const auto& e) { return e.name == d.name; });
            if (it == out.datatypes.end()) {
                out.datatypes.push_back(d);
            } else if (it->constructors != d.constructors) {
                throw SortConflict("datatype '" + d.name +
                                   "' declared with different constructors across units");
            }
        }
    }

    // Single-link clustering of variables across units.
    std::vector<UnitVar> vars;
    for (size_t i = 0; i < units.size(); ++i)
        for (const auto& v : units[i].variables) vars.push_back({i, v});
    std::vector<size_t> parent(vars.size());
    std::iota(parent.begin(), parent.end(), 0);
    for (size_t i = 0; i < vars.size(); ++i) {
        for (size_t j = i + 1; j < vars.size(); ++j) {
            if (vars[i].unit == vars[j].unit) continue;
            double sim = embedder.similarity(vars[i].spec, vars[j].spec);
            if (sim + 1e-12 < cluster_threshold) continue;
            if (!(vars[i].spec.sort == vars[j].spec.sort))
                throw SortConflict("variables '" + vars[i].spec.name + "' and '" +
                                   vars[j].spec.name +
                                   "' cluster together but have different sorts (" +
                                   vars[i].spec.sort.str() + " vs " + vars[j].spec.sort.str() +
                                   ")");
            parent[find_root(parent, j)] = find_root(parent, i);
        }
    }

    // Cluster -> canonical spec (lexicographically smallest name, longest
    // description; other descriptions land in provenance-free metadata of the
    // description? no: they are simply dropped in favor of the longest).
    std::map<size_t, std::vector<size_t>> clusters;
    for (size_t i = 0; i < vars.size(); ++i) clusters[find_root(parent, i)].push_back(i);

    struct ClusterInfo {
        std::string canonical;
        VariableSpec spec;
        std::vector<size_t> members;
        size_t first_occurrence;
    };
    std::vector<ClusterInfo> infos;
    for (auto& [root, members] : clusters) {
        ClusterInfo ci;
        ci.members = members;
        ci.first_occurrence = *std::min_element(members.begin(), members.end());
        ci.canonical = vars[members[0]].spec.name;
        ci.spec = vars[members[0]].spec;
        for (size_t m : members) {
            const auto& s = vars[m].spec;
            if (s.name < ci.canonical) ci.canonical = s.name;
            if (s.description.size() > ci.spec.description.size())
                ci.spec.description = s.description;
        }
        ci.spec.name = ci.canonical;
        infos.push_back(std::move(ci));
    }
    std::sort(infos.begin(), infos.end(),
              [](const auto& a, const auto& b) { return a.first_occurrence < b.first_occurrence; });

    // Numeric suffixes for distinct clusters sharing a canonical name.
    std::map<std::string, size_t> name_count;
    for (const auto& ci : infos) ++name_count[ci.canonical];
    std::map<std::string, size_t> name_seen;
    for (auto& ci : infos) {
        if (name_count[ci.canonical] > 1) {
            size_t n = ++name_seen[ci.canonical];
            ci.spec.name = ci.canonical + "_" + std::to_string(n);
        }
        out.variables.push_back(ci.spec);
        for (size_t m : ci.members)
            result.renaming[{vars[m].unit, vars[m].spec.name}] = ci.spec.name;
    }

    // Rewrite rules per unit and drop syntactic duplicates.
    std::set<std::string> seen_terms;
    std::set<std::string> used_ids;
    for (size_t i = 0; i < units.size(); ++i) {
        std::map<std::string, std::string> ren;
        for (const auto& v : units[i].variables)
            ren[v.name] = result.renaming.at({i, v.name});
        for (const auto& r : units[i].rules) {
            logic::Term t = rename_vars(r.term, ren);
            std::string key = logic::print_term(t);
            if (!seen_terms.insert(key).second) continue;
            std::string id = r.id;
            size_t n = 1;
            while (!used_ids.insert(id).second) id = r.id + "_" + std::to_string(++n);
            out.rules.push_back({id, t, r.provenance});
        }
    }
    validate(out);
    return result;
}

// ---------------------------------------------------------------------------
// Persistence

namespace {

json sort_to_json(const logic::Sort& s) {
    if (s.kind == logic::SortKind::Datatype) return json{{"datatype", s.datatype}};
    return json(s.str());
}

logic::Sort sort_from_json(const json& j, const std::string& path) {
    if (j.is_string()) {
        std::string s = j.get<std::string>();
        if (s != "Bool" && s != "Int" && s != "Real")
            throw FormatError(path, "unknown sort '" + s + "'");
        return logic::sort_from_string(s);
    }
    if (j.is_object() && j.contains("datatype") && j["datatype"].is_string())
        return logic::Sort::dt(j["datatype"].get<std::string>());
    throw FormatError(path, "sort must be \"Bool\"|\"Int\"|\"Real\" or {\"datatype\": name}");
}

}  // namespace

std::string to_json(const PolicyModel& m) {
    json j;
    j["datatypes"] = json::array();
    for (const auto& d : m.datatypes)
        j["datatypes"].push_back({{"name", d.name}, {"constructors", d.constructors}});
    j["variables"] = json::array();
    for (const auto& v : m.variables)
        j["variables"].push_back({{"name", v.name},
                                  {"sort", sort_to_json(v.sort)},
                                  {"description", v.description}});
    j["rules"] = json::array();
    for (const auto& r : m.rules) {
        json jr = {{"id", r.id}, {"smtlib", logic::print_term(r.term)}};
        if (!r.provenance.empty()) jr["provenance"] = r.provenance;
        j["rules"].push_back(jr);
    }
    if (!m.metadata.empty()) j["metadata"] = m.metadata;
    return j.dump(2) + "\n";
}

PolicyModel from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError("", std::string("invalid JSON: ") + e.what());
    }
    if (!j.is_object()) throw FormatError("", "top level must be an object");
    for (const char* key : {"datatypes", "variables", "rules"}) {
        if (!j.contains(key) || !j[key].is_array())
            throw FormatError("/" + std::string(key), "missing or not an array");
    }
    PolicyModel m;
    size_t i = 0;
    for (const auto& jd : j["datatypes"]) {
        std::string path = "/datatypes/" + std::to_string(i++);
        if (!jd.is_object() || !jd.contains("name") || !jd.contains("constructors"))
            throw FormatError(path, "expected {name, constructors}");
        logic::DatatypeDecl d;
        d.name = jd["name"].get<std::string>();
        for (const auto& c : jd["constructors"]) d.constructors.push_back(c.get<std::string>());
        m.datatypes.push_back(d);
    }
    i = 0;
    for (const auto& jv : j["variables"]) {
        std::string path = "/variables/" + std::to_string(i++);
        if (!jv.is_object() || !jv.contains("name") || !jv.contains("sort") ||
            !jv.contains("description"))
            throw FormatError(path, "expected {name, sort, description}");
        VariableSpec v;
        v.name = jv["name"].get<std::string>();
        v.sort = sort_from_json(jv["sort"], path + "/sort");
        v.description = jv["description"].get<std::string>();
        if (v.description.empty()) throw FormatError(path + "/description", "must be nonempty");
        m.variables.push_back(v);
    }
    logic::SymbolTable env;
    try {
        env = m.env();
    } catch (const std::exception& e) {
        throw FormatError("/variables", e.what());
    }
    i = 0;
    for (const auto& jr : j["rules"]) {
        std::string path = "/rules/" + std::to_string(i++);
        if (!jr.is_object() || !jr.contains("id") || !jr.contains("smtlib"))
            throw FormatError(path, "expected {id, smtlib}");
        Rule r;
        r.id = jr["id"].get<std::string>();
        try {
            r.term = logic::parse_term(jr["smtlib"].get<std::string>(), env);
        } catch (const std::exception& e) {
            throw FormatError(path + "/smtlib", e.what());
        }
        if (jr.contains("provenance")) r.provenance = jr["provenance"].get<std::string>();
        m.rules.push_back(r);
    }
    if (j.contains("metadata"))
        for (const auto& [k, v] : j["metadata"].items()) m.metadata[k] = v.get<std::string>();
    try {
        validate(m);
    } catch (const ModelError& e) {
        throw FormatError("", e.what());
    }
    return m;
}

void save(const PolicyModel& m, const std::string& path) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw ModelError("cannot write " + path);
    f << to_json(m);
}

PolicyModel load(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw ModelError("cannot read " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return from_json(ss.str());
}

}  // namespace policycheck::model
