#include "flowbench/labeling.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <regex>
#include <set>
#include <sstream>

#include "flowbench/rng.hpp"

namespace flowbench {

std::size_t TaskSpec::index_of(const std::string& cls) const {
    auto it = std::find(classes.begin(), classes.end(), cls);
    if (it == classes.end()) throw std::out_of_range("class not in task: " + cls);
    return static_cast<std::size_t>(it - classes.begin());
}

bool TaskSpec::has_class(const std::string& cls) const {
    return std::find(classes.begin(), classes.end(), cls) != classes.end();
}

TaskSpec make_task(std::vector<std::string> classes) {
    std::set<std::string> seen;
    for (const auto& c : classes) {
        if (!seen.insert(c).second)
            throw std::invalid_argument("duplicate class name: " + c);
    }
    TaskSpec t;
    t.classes = std::move(classes);
    return t;
}

void validate_rules(const std::vector<LabelRule>& rules) {
    std::set<int> prios;
    for (const auto& r : rules) {
        if (r.label.service.empty() || r.label.category.empty())
            throw std::invalid_argument("rule labels must be non-empty (pattern '" + r.pattern +
                                        "')");
        if (!prios.insert(r.priority).second)
            throw std::invalid_argument("duplicate rule priority " + std::to_string(r.priority));
        try {
            std::regex re(r.pattern);
        } catch (const std::regex_error& e) {
            throw std::invalid_argument("rule pattern '" + r.pattern +
                                        "' does not compile: " + e.what());
        }
    }
}

std::vector<LabelRule> parse_rules(std::istream& in, const std::string& origin) {
    std::vector<LabelRule> rules;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;

        std::vector<std::string> fields;
        std::size_t pos = 0;
        while (fields.size() < 3) {
            const auto tab = line.find('\t', pos);
            if (tab == std::string::npos) break;
            fields.push_back(line.substr(pos, tab - pos));
            pos = tab + 1;
        }
        fields.push_back(line.substr(pos));
        if (fields.size() != 4) {
            throw MalformedInput(origin + " line " + std::to_string(lineno) +
                                     ": expected 4 tab-separated fields "
                                     "(priority, regex, service, category)",
                                 lineno);
        }
        LabelRule r;
        try {
            std::size_t used = 0;
            r.priority = std::stoi(fields[0], &used);
            if (used != fields[0].size()) throw std::invalid_argument("trailing characters");
        } catch (const std::exception&) {
            throw MalformedInput(origin + " line " + std::to_string(lineno) +
                                     ": priority must be an integer, got '" + fields[0] + "'",
                                 lineno);
        }
        r.pattern = fields[1];
        r.label.service = fields[2];
        r.label.category = fields[3];
        rules.push_back(std::move(r));
    }
    try {
        validate_rules(rules);
    } catch (const std::invalid_argument& e) {
        throw MalformedInput(origin + ": " + e.what());
    }
    return rules;
}

std::vector<LabelRule> load_rules(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot open rule file: " + path);
    return parse_rules(in, path);
}

std::optional<LabelPair> label_sni(const std::string& sni, const std::vector<LabelRule>& rules) {
    const LabelRule* best = nullptr;
    for (const auto& r : rules) {
        if (best && best->priority > r.priority) continue;
        if (std::regex_search(sni, std::regex(r.pattern))) best = &r;
    }
    if (!best) return std::nullopt;
    return best->label;
}

std::size_t label_dataset(Dataset& ds, const std::vector<LabelRule>& rules) {
    // Pre-compile once; label_sni would recompile per call.
    std::vector<std::pair<std::regex, const LabelRule*>> compiled;
    compiled.reserve(rules.size());
    for (const auto& r : rules) compiled.emplace_back(std::regex(r.pattern), &r);

    std::size_t labeled = 0;
    for (auto& item : ds.items) {
        auto* flow = std::get_if<Flow>(&item.data);
        if (!flow || !flow->sni) continue;
        const LabelRule* best = nullptr;
        for (const auto& [re, rule] : compiled) {
            if (best && best->priority > rule->priority) continue;
            if (std::regex_search(*flow->sni, re)) best = rule;
        }
        if (best) {
            item.set_label(best->label);
            ++labeled;
        }
    }
    return labeled;
}

TaskSpec select_common_classes(const Dataset& a, const Dataset& b, std::size_t k) {
    std::map<std::string, std::uint64_t> ca, cb;
    for (const auto& it : a.items)
        if (it.label()) ++ca[it.label()->service];
    for (const auto& it : b.items)
        if (it.label()) ++cb[it.label()->service];

    std::vector<std::pair<std::uint64_t, std::string>> common;  // (min count, class)
    for (const auto& [cls, na] : ca) {
        auto it = cb.find(cls);
        if (it == cb.end()) continue;
        common.emplace_back(std::min(na, it->second), cls);
    }
    if (common.size() < k) {
        throw ClassShortfallError("only " + std::to_string(common.size()) +
                                  " classes appear in both datasets; " + std::to_string(k) +
                                  " requested");
    }
    std::sort(common.begin(), common.end(), [](const auto& x, const auto& y) {
        if (x.first != y.first) return x.first > y.first;
        return x.second < y.second;
    });
    std::vector<std::string> classes;
    classes.reserve(k);
    for (std::size_t i = 0; i < k; ++i) classes.push_back(common[i].second);
    return make_task(std::move(classes));
}

TaskSpec group_task(const TaskSpec& task, const std::map<std::string, std::string>& groups) {
    std::vector<std::string> group_names;
    for (const auto& cls : task.classes) {
        auto it = groups.find(cls);
        if (it == groups.end())
            throw std::invalid_argument("grouping does not map class '" + cls + "'");
        if (std::find(group_names.begin(), group_names.end(), it->second) == group_names.end())
            group_names.push_back(it->second);
    }
    TaskSpec out = make_task(std::move(group_names));
    for (const auto& cls : task.classes) out.grouping[cls] = groups.at(cls);
    return out;
}

std::map<std::string, std::string> meaningful_grouping() {
    std::map<std::string, std::string> g;
    for (const char* c : {"facebook-web", "facebook-video", "facebook-messenger", "instagram"})
        g[c] = "Facebook";
    for (const char* c :
         {"google-search", "google-ads", "google-play", "google-drive", "google-fonts",
          "youtube"})
        g[c] = "Google";
    for (const char* c : {"office-365", "outlook"}) g[c] = "Microsoft";
    for (const char* c : {"apple-web", "apple-itunes", "apple-icloud"}) g[c] = "Apple";
    for (const char* c : {"netflix", "spotify", "twitter", "tiktok", "amazon", "dropbox",
                          "steam", "zoom", "reddit", "wikipedia"})
        g[c] = "Other";
    return g;
}

std::map<std::string, std::string> load_grouping(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw MalformedInput("cannot open grouping file: " + path);
    std::map<std::string, std::string> g;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string::npos || line[first] == '#') continue;
        const auto tab = line.find('\t');
        if (tab == std::string::npos) {
            throw MalformedInput(path + " line " + std::to_string(lineno) +
                                     ": expected `class<TAB>group`",
                                 lineno);
        }
        g[line.substr(0, tab)] = line.substr(tab + 1);
    }
    return g;
}

std::map<std::string, std::string> random_grouping(
    const TaskSpec& task, const std::map<std::string, std::uint64_t>& class_counts,
    const std::vector<std::uint64_t>& target_sizes, std::uint64_t seed, double tolerance,
    std::size_t max_tries) {
    if (target_sizes.empty()) throw std::invalid_argument("need at least one target group");
    std::uint64_t total = 0;
    for (const auto& cls : task.classes) {
        auto it = class_counts.find(cls);
        if (it == class_counts.end())
            throw std::invalid_argument("class_counts missing class '" + cls + "'");
        total += it->second;
    }
    std::uint64_t target_total = 0;
    for (auto t : target_sizes) target_total += t;
    if (total == 0 || std::abs(static_cast<double>(target_total) - static_cast<double>(total)) >
                          0.10 * static_cast<double>(total)) {
        throw std::invalid_argument("target sizes sum to " + std::to_string(target_total) +
                                    ", more than 10% away from the item total " +
                                    std::to_string(total));
    }

    const std::size_t g = target_sizes.size();
    Rng rng(seed);
    std::map<std::string, std::string> best;
    double best_dev = std::numeric_limits<double>::infinity();

    std::vector<std::string> order = task.classes;
    for (std::size_t attempt = 0; attempt < max_tries; ++attempt) {
        rng.shuffle(order);
        std::vector<double> fill(g, 0.0);
        std::map<std::string, std::string> assign;
        for (const auto& cls : order) {
            // Put the class where the relative deficit is largest.
            std::size_t pick = 0;
            double best_deficit = -std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < g; ++i) {
                const double t = static_cast<double>(target_sizes[i]);
                const double deficit = (t - fill[i]) / std::max(t, 1.0);
                if (deficit > best_deficit) {
                    best_deficit = deficit;
                    pick = i;
                }
            }
            assign[cls] = "group" + std::to_string(pick);
            fill[pick] += static_cast<double>(class_counts.at(cls));
        }
        double dev = 0.0;
        for (std::size_t i = 0; i < g; ++i) {
            const double t = static_cast<double>(target_sizes[i]);
            dev = std::max(dev, std::abs(fill[i] - t) / std::max(t, 1.0));
        }
        if (dev < best_dev) {
            best_dev = dev;
            best = assign;
        }
        if (dev <= tolerance) return assign;
    }
    throw RandomGroupingError("no random grouping within ±" +
                                  std::to_string(static_cast<int>(tolerance * 100)) +
                                  "% of the targets after " + std::to_string(max_tries) +
                                  " attempts (best deviation " + std::to_string(best_dev) + ")",
                              std::move(best), best_dev);
}

Dataset filter_relabel(const Dataset& ds, const TaskSpec& task) {
    Dataset out;
    out.name = ds.name;
    out.collection = ds.collection;
    for (const auto& item : ds.items) {
        if (!item.label()) continue;
        std::string service = item.label()->service;
        if (!task.grouping.empty()) {
            auto it = task.grouping.find(service);
            if (it == task.grouping.end()) continue;
            service = it->second;
        } else if (!task.has_class(service)) {
            continue;
        }
        DatasetItem copy = item;
        copy.set_label(LabelPair{service, item.label()->category});
        out.items.push_back(std::move(copy));
    }
    return out;
}

}  // namespace flowbench
