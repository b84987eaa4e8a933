#include "nof/ontology.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include <json.hpp>

#include "nof/error.hpp"
#include "nof/io.hpp"

namespace nof {

using json = nlohmann::json;

namespace {

constexpr std::string_view kClusterAttribute = "CLUSTER";

int line_at(std::string_view text, std::size_t offset) {
  offset = std::min(offset, text.size());
  return 1 + static_cast<int>(std::count(text.begin(), text.begin() + static_cast<std::ptrdiff_t>(offset), '\n'));
}

// Line of the first quoted occurrence of `needle` at or after `from`; 0 if absent.
int line_of(std::string_view text, const std::string& needle, std::size_t from = 0) {
  const auto pos = text.find(json(needle).dump(), from);
  return pos == std::string_view::npos ? 0 : line_at(text, pos);
}

std::size_t offset_of(std::string_view text, const std::string& needle, std::size_t from = 0) {
  const auto pos = text.find(json(needle).dump(), from);
  return pos == std::string_view::npos ? from : pos;
}

Item consequent_item(const std::string& s) {
  if (s.find('=') == std::string::npos && s.find("∈") == std::string::npos && s.find('>') == std::string::npos &&
      s.find("≤") == std::string::npos)
    return Item::category(std::string(kClusterAttribute), io::trim(s));
  return Item::parse(s);
}

Itemset consequent_from_json(const json& j) {
  Itemset out;
  if (j.is_string()) {
    out.push_back(consequent_item(j.get<std::string>()));
  } else if (j.is_array()) {
    for (const auto& e : j) {
      if (!e.is_string()) throw InputError("consequent entries must be strings");
      out.push_back(consequent_item(e.get<std::string>()));
    }
  } else {
    throw InputError("'then' must be a string, a list, or {\"not\": ...}");
  }
  if (out.empty()) throw InputError("empty consequent");
  return canonical(std::move(out));
}

json consequent_to_json(const Itemset& items) {
  const auto one = [](const Item& it) {
    return it.attribute == kClusterAttribute && it.kind == Item::Kind::category ? it.value : it.text();
  };
  if (items.size() == 1) return one(items[0]);
  json arr = json::array();
  for (const auto& it : items) arr.push_back(one(it));
  return arr;
}

double number_field(const json& obj, const char* key, double fallback) {
  if (!obj.contains(key)) return fallback;
  if (!obj[key].is_number()) throw InputError(std::string("threshold '") + key + "' must be a number");
  return obj[key].get<double>();
}

std::string fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

void sort_entries(std::vector<ReportEntry>& entries) {
  std::stable_sort(entries.begin(), entries.end(),
                   [](const ReportEntry& a, const ReportEntry& b) { return a.rule.text() < b.rule.text(); });
}

json entry_json(const AssociationRule& r, const std::vector<std::string>* ids) {
  json antecedent = json::array(), consequent = json::array();
  for (const auto& it : r.antecedent) antecedent.push_back(it.text());
  for (const auto& it : r.consequent) consequent.push_back(it.text());
  json j{{"rule", r.text()},
         {"antecedent", antecedent},
         {"consequent", consequent},
         {"support", r.support},
         {"confidence", r.confidence},
         {"reliability", r.reliability}};
  if (ids) j["expert_ids"] = *ids;
  return j;
}

}  // namespace

void Thresholds::validate() const {
  if (!(beta_sup > 0.0 && beta_sup <= 1.0)) throw ConfigError("beta_sup must be in (0, 1]");
  if (!(beta_conf > 0.0 && beta_conf <= 1.0)) throw ConfigError("beta_conf must be in (0, 1]");
  if (!(pi_min >= 0.0 && pi_min <= 1.0)) throw ConfigError("pi_min must be in [0, 1]");
}

std::string ExpertRule::text() const {
  return itemset_text(antecedent) + " -> " + (negated ? "NOT " : "") + itemset_text(consequent);
}

std::vector<std::string> OntologyRuleBase::declared_attributes() const {
  std::vector<std::string> out(kSummaryColumns.begin(), kSummaryColumns.end());
  out.emplace_back(kClusterAttribute);
  for (const auto& a : extra_attributes)
    if (std::find(out.begin(), out.end(), a) == out.end()) out.push_back(a);
  return out;
}

OntologyRuleBase parse_rule_base(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string("malformed rule file: ") + e.what(), line_at(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  if (!doc.is_object()) throw ParseError("rule file must hold a JSON object", 1);

  OntologyRuleBase base;
  if (doc.contains("thresholds")) {
    const auto& t = doc["thresholds"];
    if (!t.is_object()) throw ParseError("'thresholds' must be an object", line_of(text, "thresholds"));
    try {
      base.thresholds.beta_sup = number_field(t, "beta_sup", base.thresholds.beta_sup);
      base.thresholds.beta_conf = number_field(t, "beta_conf", base.thresholds.beta_conf);
      base.thresholds.pi_min = number_field(t, "pi_min", base.thresholds.pi_min);
      base.thresholds.validate();
    } catch (const Error& e) {
      throw ParseError(e.what(), line_of(text, "thresholds"));
    }
  }
  if (doc.contains("attributes")) {
    if (!doc["attributes"].is_array()) throw ParseError("'attributes' must be a list", line_of(text, "attributes"));
    for (const auto& a : doc["attributes"]) {
      if (!a.is_string()) throw ParseError("attribute names must be strings", line_of(text, "attributes"));
      base.extra_attributes.push_back(a.get<std::string>());
    }
  }
  const auto declared = base.declared_attributes();
  const auto check_declared = [&](const Item& it, std::size_t from, const std::string& raw) {
    if (std::find(declared.begin(), declared.end(), it.attribute) == declared.end())
      throw ParseError("undeclared attribute '" + it.attribute + "'", line_of(text, raw, from));
  };

  std::set<std::string> ids;
  std::size_t cursor = 0;
  if (doc.contains("rules")) {
    if (!doc["rules"].is_array()) throw ParseError("'rules' must be a list", line_of(text, "rules"));
    cursor = offset_of(text, "rules");
    std::size_t index = 0;
    for (const auto& jr : doc["rules"]) {
      ++index;
      const int rule_line = line_at(text, text.find('{', cursor + 1));
      if (!jr.is_object()) throw ParseError("rule " + std::to_string(index) + " must be an object", rule_line);
      ExpertRule rule;
      if (jr.contains("id")) {
        if (!jr["id"].is_string()) throw ParseError("rule id must be a string", rule_line);
        rule.id = jr["id"].get<std::string>();
        cursor = offset_of(text, rule.id, cursor + 1);
      } else {
        rule.id = "R" + std::to_string(index);
        cursor = text.find('{', cursor + 1);
      }
      const int id_line = line_at(text, cursor);
      if (!ids.insert(rule.id).second) throw ParseError("duplicate rule id '" + rule.id + "'", id_line);
      if (!jr.contains("if") || !jr["if"].is_array())
        throw ParseError("rule '" + rule.id + "' needs an 'if' list", id_line);
      if (!jr.contains("then")) throw ParseError("rule '" + rule.id + "' needs a 'then'", id_line);
      std::set<std::string> seen_attrs;
      for (const auto& ji : jr["if"]) {
        if (!ji.is_string()) throw ParseError("rule '" + rule.id + "': conditions must be strings", id_line);
        const auto raw = ji.get<std::string>();
        Item it;
        try {
          it = Item::parse(raw);
        } catch (const InputError& e) {
          const int l = line_of(text, raw, cursor);
          throw ParseError(e.what(), l ? l : id_line);
        }
        check_declared(it, cursor, raw);
        if (!seen_attrs.insert(it.attribute).second)
          throw ParseError("rule '" + rule.id + "' tests " + it.attribute + " twice", line_of(text, raw, cursor));
        rule.antecedent.push_back(std::move(it));
      }
      rule.antecedent = canonical(std::move(rule.antecedent));
      const json* then = &jr["then"];
      if (then->is_object()) {
        if (then->size() != 1 || !then->contains("not"))
          throw ParseError("rule '" + rule.id + "': 'then' object must be {\"not\": ...}", id_line);
        rule.negated = true;
        then = &(*then)["not"];
      }
      try {
        rule.consequent = consequent_from_json(*then);
      } catch (const ParseError&) {
        throw;
      } catch (const InputError& e) {
        throw ParseError("rule '" + rule.id + "': " + e.what(), id_line);
      }
      for (const auto& it : rule.consequent) {
        const std::string raw = then->is_string() ? then->get<std::string>() : it.text();
        check_declared(it, cursor, raw);
        for (const auto& a : rule.antecedent)
          if (a.attribute == it.attribute)
            throw ParseError("rule '" + rule.id + "' uses " + it.attribute + " on both sides", id_line);
      }
      base.rules.push_back(std::move(rule));
    }
  }
  if (doc.contains("classes")) {
    if (!doc["classes"].is_array()) throw ParseError("'classes' must be a list", line_of(text, "classes"));
    for (const auto& jc : doc["classes"]) {
      try {
        OntologyClass c;
        c.name = jc.at("name").get<std::string>();
        if (jc.contains("parent") && !jc["parent"].is_null()) c.parent = jc["parent"].get<std::string>();
        if (jc.contains("members")) c.members = jc["members"].get<std::vector<std::size_t>>();
        base.classes.push_back(std::move(c));
      } catch (const json::exception& e) {
        throw ParseError(std::string("malformed class declaration: ") + e.what(), line_of(text, "classes"));
      }
    }
  }
  return base;
}

OntologyRuleBase load_rule_base(const std::filesystem::path& path) {
  try {
    return parse_rule_base(io::read_file(path));
  } catch (const ParseError& e) {
    throw ParseError(path.string() + ": " + e.what(), 0);
  }
}

std::string rule_base_to_json(const OntologyRuleBase& base) {
  json rules = json::array();
  for (const auto& r : base.rules) {
    json cond = json::array();
    for (const auto& it : r.antecedent) cond.push_back(it.text());
    json then = consequent_to_json(r.consequent);
    rules.push_back({{"id", r.id}, {"if", cond}, {"then", r.negated ? json{{"not", then}} : then}});
  }
  json classes = json::array();
  for (const auto& c : base.classes) classes.push_back({{"name", c.name}, {"parent", c.parent}, {"members", c.members}});
  json doc{{"thresholds",
            {{"beta_sup", base.thresholds.beta_sup},
             {"beta_conf", base.thresholds.beta_conf},
             {"pi_min", base.thresholds.pi_min}}},
           {"rules", rules},
           {"classes", classes}};
  if (!base.extra_attributes.empty()) doc["attributes"] = base.extra_attributes;
  return doc.dump(1) + "\n";
}

bool items_align(const Item& mined, const Item& expert) {
  if (mined.attribute != expert.attribute || mined.kind != expert.kind) return false;
  if (mined.kind == Item::Kind::category) return mined.value == expert.value;
  const auto bound_ok = [&](double e) { return std::isfinite(e) && mined.lo <= e && e <= mined.hi; };
  if (std::isfinite(expert.lo) != std::isfinite(mined.lo)) return false;
  if (std::isfinite(expert.hi) != std::isfinite(mined.hi)) return false;
  if (std::isfinite(expert.lo) && !bound_ok(expert.lo)) return false;
  if (std::isfinite(expert.hi) && !bound_ok(expert.hi)) return false;
  return true;
}

bool antecedents_match(const Itemset& mined, const Itemset& expert, const MatchOptions& options) {
  if (!options.subsumption && mined.size() != expert.size()) return false;
  if (expert.size() > mined.size()) return false;
  std::vector<bool> used(mined.size(), false);
  for (const auto& e : expert) {
    bool found = false;
    for (std::size_t i = 0; i < mined.size() && !found; ++i)
      if (!used[i] && items_align(mined[i], e)) {
        used[i] = true;
        found = true;
      }
    if (!found) return false;
  }
  return true;
}

namespace {

bool consequents_match(const Itemset& mined, const Itemset& expert) {
  return antecedents_match(mined, expert, MatchOptions{});
}

}  // namespace

bool rule_match(const AssociationRule& mined, const ExpertRule& expert, const MatchOptions& options) {
  if (expert.negated) return false;
  return consequents_match(mined.consequent, expert.consequent) &&
         antecedents_match(mined.antecedent, expert.antecedent, options);
}

bool contradicts(const AssociationRule& mined, const ExpertRule& expert, const MatchOptions& options) {
  if (!expert.negated) return false;
  return consequents_match(mined.consequent, expert.consequent) &&
         antecedents_match(mined.antecedent, expert.antecedent, options);
}

PartitionReport partition(const std::vector<AssociationRule>& mined, const OntologyRuleBase& base,
                          const MatchOptions& options) {
  base.thresholds.validate();
  const auto& th = base.thresholds;
  PartitionReport report;
  report.thresholds = th;
  for (const auto& r : mined)
    if (r.support >= th.beta_sup && r.confidence >= th.beta_conf) report.arec.push_back(r);
  sort_rules(report.arec);

  std::vector<bool> expert_hit(base.rules.size(), false);
  for (const auto& r : report.arec) {
    ReportEntry contr{r, {}}, known{r, {}};
    for (std::size_t e = 0; e < base.rules.size(); ++e) {
      if (contradicts(r, base.rules[e], options)) contr.expert_ids.push_back(base.rules[e].id);
      if (rule_match(r, base.rules[e], options)) {
        known.expert_ids.push_back(base.rules[e].id);
        expert_hit[e] = true;
      }
    }
    const bool strong = r.reliability >= th.pi_min;
    if (!contr.expert_ids.empty())
      report.contr.push_back(std::move(contr));
    else if (!known.expert_ids.empty())
      (strong ? report.known_histr : report.known_lwstr).push_back(std::move(known));
    else
      (strong ? report.novel_histr : report.residue).push_back(std::move(known));
  }
  for (std::size_t e = 0; e < base.rules.size(); ++e)
    if (!expert_hit[e]) report.missing.push_back(base.rules[e]);
  std::stable_sort(report.missing.begin(), report.missing.end(),
                   [](const ExpertRule& a, const ExpertRule& b) { return a.text() < b.text(); });
  for (auto* set : {&report.novel_histr, &report.known_histr, &report.known_lwstr, &report.contr, &report.residue})
    sort_entries(*set);
  return report;
}

std::string report_to_json(const PartitionReport& report) {
  const auto entries = [](const std::vector<ReportEntry>& v, bool with_ids) {
    json arr = json::array();
    for (const auto& e : v) arr.push_back(entry_json(e.rule, with_ids ? &e.expert_ids : nullptr));
    return arr;
  };
  json arec = json::array();
  for (const auto& r : report.arec) arec.push_back(entry_json(r, nullptr));
  json missing = json::array();
  for (const auto& m : report.missing) missing.push_back({{"id", m.id}, {"rule", m.text()}, {"negated", m.negated}});
  json doc{{"format", "nof-partition/1"},
           {"thresholds",
            {{"beta_sup", report.thresholds.beta_sup},
             {"beta_conf", report.thresholds.beta_conf},
             {"pi_min", report.thresholds.pi_min}}},
           {"counts",
            {{"arec", report.arec.size()},
             {"novel_histr", report.novel_histr.size()},
             {"known_histr", report.known_histr.size()},
             {"known_lwstr", report.known_lwstr.size()},
             {"missing", report.missing.size()},
             {"contr", report.contr.size()},
             {"residue", report.residue.size()}}},
           {"arec", arec},
           {"novel_histr", entries(report.novel_histr, false)},
           {"known_histr", entries(report.known_histr, true)},
           {"known_lwstr", entries(report.known_lwstr, true)},
           {"missing", missing},
           {"contr", entries(report.contr, true)},
           {"residue", entries(report.residue, false)}};
  return doc.dump(1) + "\n";
}

std::string report_to_text(const PartitionReport& report) {
  std::string out;
  out += "beta_sup=" + io::format_double(report.thresholds.beta_sup) +
         " beta_conf=" + io::format_double(report.thresholds.beta_conf) +
         " pi_min=" + io::format_double(report.thresholds.pi_min) + "\n";
  out += "accepted rules: " + std::to_string(report.arec.size()) + "\n";
  const auto section = [&](const std::string& title, const std::vector<ReportEntry>& v) {
    out += "\n[" + title + "] " + std::to_string(v.size()) + "\n";
    for (const auto& e : v) {
      out += "  " + e.rule.text() + "  supp=" + fixed4(e.rule.support) + " conf=" + fixed4(e.rule.confidence) +
             " rel=" + fixed4(e.rule.reliability);
      if (!e.expert_ids.empty()) out += "  expert=" + io::join(e.expert_ids, ",");
      out += "\n";
    }
  };
  section("novel, high strength", report.novel_histr);
  section("known, high strength", report.known_histr);
  section("known, low strength", report.known_lwstr);
  out += "\n[missing] " + std::to_string(report.missing.size()) + "\n";
  for (const auto& m : report.missing) out += "  " + m.id + ": " + m.text() + "\n";
  if (!report.missing.empty())
    out += "  note: missing rules point at miscalibrated thresholds or knowledge the data does not support\n";
  section("contradictory", report.contr);
  section("residue (novel, low strength; not a knowledge category)", report.residue);
  return out;
}

}  // namespace nof
