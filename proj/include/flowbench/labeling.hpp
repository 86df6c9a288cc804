#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "flowbench/flowdata.hpp"

namespace flowbench {

struct LabelRule {
    int priority = 0;  // larger wins; unique within a rule set
    std::string pattern;
    LabelPair label;
};

struct TaskSpec {
    std::vector<std::string> classes;  // ordered; index = position
    std::map<std::string, std::string> grouping;  // fine class -> group (empty = none)

    std::size_t index_of(const std::string& cls) const;
    bool has_class(const std::string& cls) const;
};

TaskSpec make_task(std::vector<std::string> classes);

// Rule files: `priority<TAB>regex<TAB>service<TAB>category`, UTF-8, '#'
// comments and blank lines ignored. Patterns must compile (ECMAScript) and
// priorities must be unique.
std::vector<LabelRule> load_rules(const std::string& path);
std::vector<LabelRule> parse_rules(std::istream& in, const std::string& origin);
void validate_rules(const std::vector<LabelRule>& rules);

// Highest-priority matching rule's label; nullopt when nothing matches.
std::optional<LabelPair> label_sni(const std::string& sni, const std::vector<LabelRule>& rules);

// Labels every flow that has an SNI and a matching rule. Returns the number
// of items labeled.
std::size_t label_dataset(Dataset& ds, const std::vector<LabelRule>& rules);

struct ClassShortfallError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

// The k service classes maximizing min(count in a, count in b), ties broken
// lexicographically. Classes are ordered by descending min-count. Fewer than
// k classes present in both datasets raises ClassShortfallError.
TaskSpec select_common_classes(const Dataset& a, const Dataset& b, std::size_t k);

// New task whose classes are the distinct group names (in first-appearance
// order over task.classes). Every task class must be mapped.
TaskSpec group_task(const TaskSpec& task, const std::map<std::string, std::string>& groups);

// Built-in 5-way grouping over the bundled 25-class demo task.
std::map<std::string, std::string> meaningful_grouping();

// `class<TAB>group` per line, '#' comments.
std::map<std::string, std::string> load_grouping(const std::string& path);

struct RandomGroupingError : std::runtime_error {
    RandomGroupingError(const std::string& what, std::map<std::string, std::string> best,
                        double worst)
        : std::runtime_error(what), best_assignment(std::move(best)), worst_deviation(worst) {}
    std::map<std::string, std::string> best_assignment;
    double worst_deviation;  // max relative deviation of the best attempt
};

// Seeded random assignment of task classes to groups named "group0".."groupN"
// such that each group's item count lands within ±15% of its target.
// Restarts until it fits; throws RandomGroupingError (carrying the best
// attempt) when no attempt fits.
std::map<std::string, std::string> random_grouping(
    const TaskSpec& task, const std::map<std::string, std::uint64_t>& class_counts,
    const std::vector<std::uint64_t>& target_sizes, std::uint64_t seed,
    double tolerance = 0.15, std::size_t max_tries = 20000);

// Keeps labeled items whose service is (or maps into) a task class and
// rewrites labels to the task's class names. Items outside the task drop out.
Dataset filter_relabel(const Dataset& ds, const TaskSpec& task);

}  // namespace flowbench
