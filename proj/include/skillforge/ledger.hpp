#pragma once

#include <cstdlib>
#include <istream>
#include <map>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "errors.hpp"
#include "text.hpp"

namespace skillforge {

// Append-only trajectory ledger. One CSV row per event; a task is the row
// group sharing (run_id, task_id) and ends with exactly one eval row. The
// column set and order are frozen; readers reject any other header.

inline const char* ledger_header() {
    return "run_id,task_id,domain,method,step_idx,event_type,model,"
           "prompt_tokens,cached_prompt_tokens,completion_tokens,reasoning_tokens,"
           "action_name,action_target,routine_id,skill_id,reflector_fired,"
           "evaluator_status,wall_time_ms";
}

inline const std::set<std::string>& event_types() {
    static const std::set<std::string> kinds{"planner", "actor", "reflector",
                                             "action", "routine", "eval"};
    return kinds;
}

// Terminal status markers. Anything that is not success and not infeasible
// counts as a failure; the repeat marker additionally feeds the ARR metric.
inline constexpr const char* status_success = "success";
inline constexpr const char* status_fail = "fail";
inline constexpr const char* status_repeat = "fail:repeat_action";
inline constexpr const char* status_infeasible = "infeasible";

struct LedgerEvent {
    std::string run_id;
    std::string task_id;
    std::string domain;
    std::string method;
    long long step_idx = 0;
    std::string event_type;
    std::string model;
    long long prompt_tokens = 0;
    long long cached_prompt_tokens = 0;
    long long completion_tokens = 0;
    long long reasoning_tokens = 0;
    std::string action_name;
    std::string action_target;
    std::string routine_id;
    std::string skill_id;
    bool reflector_fired = false;
    std::string evaluator_status;
    long long wall_time_ms = 0;

    bool is_llm_call() const {
        return event_type == "planner" || event_type == "actor" || event_type == "reflector";
    }
};

// click- and keyboard-family actions share one signature shape.
inline std::string normalize_action_signature(const std::string& name, const std::string& target) {
    return to_lower(trim(name)) + "#" + to_lower(trim(target));
}

inline void validate_event(const LedgerEvent& e) {
    if (e.run_id.empty() || e.task_id.empty())
        fail(errc::invariant_violation, "ledger row missing run_id/task_id");
    if (!event_types().count(e.event_type))
        fail(errc::invariant_violation, "ledger event_type: " + e.event_type);
    if (e.prompt_tokens < 0 || e.cached_prompt_tokens < 0 || e.completion_tokens < 0 ||
        e.reasoning_tokens < 0 || e.wall_time_ms < 0)
        fail(errc::negative_count, "ledger token/time fields");
    if (e.cached_prompt_tokens > e.prompt_tokens)
        fail(errc::invariant_violation, "cached_prompt_tokens exceeds prompt_tokens");
    bool is_eval = e.event_type == "eval";
    if (is_eval != !e.evaluator_status.empty())
        fail(errc::invariant_violation, "evaluator_status must be set exactly on eval rows");
    if (e.reflector_fired && e.event_type != "reflector")
        fail(errc::invariant_violation, "reflector_fired outside reflector row");
    if (e.event_type == "action" && e.action_name.empty())
        fail(errc::invariant_violation, "action row without action_name");
    if (e.event_type == "routine" && e.routine_id.empty())
        fail(errc::invariant_violation, "routine row without routine_id");
}

namespace detail {

inline bool needs_quotes(const std::string& s) {
    return s.find_first_of(",\"\n") != std::string::npos;
}

inline std::string csv_field(const std::string& s) {
    if (!needs_quotes(s)) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += "\"";
    return out;
}

// Splits one physical CSV record; the caller guarantees quotes are balanced
// (reader merges lines until they are).
inline std::vector<std::string> csv_split(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool q = false;
    for (size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (q) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur.push_back('"');
                ++i;
            } else if (c == '"') {
                q = false;
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            q = true;
        } else if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline long long parse_ll(const std::string& s, const char* what) {
    if (s.empty()) return 0;
    size_t start = s[0] == '-' ? 1 : 0;
    if (s.find_first_not_of("0123456789", start) != std::string::npos || start == s.size())
        fail(errc::invariant_violation, std::string("ledger numeric field ") + what + ": " + s);
    return std::atoll(s.c_str());
}

} // namespace detail

inline std::string to_csv_row(const LedgerEvent& e) {
    using detail::csv_field;
    std::ostringstream os;
    os << csv_field(e.run_id) << ',' << csv_field(e.task_id) << ',' << csv_field(e.domain) << ','
       << csv_field(e.method) << ',' << e.step_idx << ',' << e.event_type << ','
       << csv_field(e.model) << ',' << e.prompt_tokens << ',' << e.cached_prompt_tokens << ','
       << e.completion_tokens << ',' << e.reasoning_tokens << ',' << csv_field(e.action_name)
       << ',' << csv_field(e.action_target) << ',' << csv_field(e.routine_id) << ','
       << csv_field(e.skill_id) << ',' << (e.reflector_fired ? "true" : "false") << ','
       << csv_field(e.evaluator_status) << ',' << e.wall_time_ms;
    return os.str();
}

// Single-writer append sink. Writes the header on an empty stream and
// validates every row before it goes out.
class LedgerWriter {
public:
    explicit LedgerWriter(std::ostream& out, bool write_header = true) : out_(out) {
        if (write_header) out_ << ledger_header() << '\n';
    }

    void append_event(const LedgerEvent& e) {
        validate_event(e);
        out_ << to_csv_row(e) << '\n';
    }

private:
    std::ostream& out_;
};

inline LedgerEvent event_from_fields(const std::vector<std::string>& f) {
    if (f.size() != 18) fail(errc::invariant_violation, "ledger row needs 18 fields");
    LedgerEvent e;
    e.run_id = f[0];
    e.task_id = f[1];
    e.domain = f[2];
    e.method = f[3];
    e.step_idx = detail::parse_ll(f[4], "step_idx");
    e.event_type = f[5];
    e.model = f[6];
    e.prompt_tokens = detail::parse_ll(f[7], "prompt_tokens");
    e.cached_prompt_tokens = detail::parse_ll(f[8], "cached_prompt_tokens");
    e.completion_tokens = detail::parse_ll(f[9], "completion_tokens");
    e.reasoning_tokens = detail::parse_ll(f[10], "reasoning_tokens");
    e.action_name = f[11];
    e.action_target = f[12];
    e.routine_id = f[13];
    e.skill_id = f[14];
    if (f[15] == "true") e.reflector_fired = true;
    else if (f[15] == "false" || f[15].empty()) e.reflector_fired = false;
    else fail(errc::invariant_violation, "reflector_fired: " + f[15]);
    e.evaluator_status = f[16];
    e.wall_time_ms = detail::parse_ll(f[17], "wall_time_ms");
    validate_event(e);
    return e;
}

inline std::vector<LedgerEvent> read_events(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) fail(errc::empty_input, "ledger stream is empty");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line != ledger_header()) fail(errc::invariant_violation, "ledger header mismatch");
    std::vector<LedgerEvent> events;
    std::string rec;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        rec = rec.empty() ? line : rec + "\n" + line;
        // an odd number of quotes means the record continues on the next line
        if (std::count(rec.begin(), rec.end(), '"') % 2 != 0) continue;
        if (trim(rec).empty()) {
            rec.clear();
            continue;
        }
        events.push_back(event_from_fields(detail::csv_split(rec)));
        rec.clear();
    }
    if (!rec.empty()) fail(errc::invariant_violation, "unterminated quoted record");
    return events;
}

// --------------------------------------------------------------- task views

struct TaskTrajectoryView {
    std::string run_id;
    std::string task_id;
    std::string domain;
    std::string method;
    std::vector<LedgerEvent> events; // ordered, non-eval
    LedgerEvent eval;

    long long steps() const { return static_cast<long long>(events.size()); }

    long long tokens_total() const {
        long long t = 0;
        for (auto& e : events) t += e.prompt_tokens + e.completion_tokens + e.reasoning_tokens;
        t += eval.prompt_tokens + eval.completion_tokens + eval.reasoning_tokens;
        return t;
    }

    long long wall_ms_total() const {
        long long t = eval.wall_time_ms;
        for (auto& e : events) t += e.wall_time_ms;
        return t;
    }

    const std::string& status() const { return eval.evaluator_status; }
    bool success() const { return status() == status_success; }
    bool infeasible() const { return status() == status_infeasible; }
    bool failed() const { return !success() && !infeasible(); }

    bool skill_hit() const {
        for (auto& e : events)
            if (!e.routine_id.empty() || !e.skill_id.empty()) return true;
        return !eval.routine_id.empty() || !eval.skill_id.empty();
    }
};

// Groups rows into task views in first-appearance order. Within a task the
// step index must be strictly increasing, the eval row must exist, be unique
// and come last.
inline std::vector<TaskTrajectoryView> read_tasks(const std::vector<LedgerEvent>& events) {
    std::vector<TaskTrajectoryView> tasks;
    std::map<std::pair<std::string, std::string>, size_t> index;
    std::vector<bool> has_eval;
    std::vector<long long> last_step;
    for (auto& e : events) {
        auto key = std::make_pair(e.run_id, e.task_id);
        auto it = index.find(key);
        size_t ti;
        if (it == index.end()) {
            ti = tasks.size();
            index.emplace(key, ti);
            TaskTrajectoryView v;
            v.run_id = e.run_id;
            v.task_id = e.task_id;
            v.domain = e.domain;
            v.method = e.method;
            tasks.push_back(std::move(v));
            has_eval.push_back(false);
            last_step.push_back(-1);
        } else {
            ti = it->second;
        }
        if (e.step_idx <= last_step[ti])
            fail(errc::non_monotone_step,
                 e.run_id + "/" + e.task_id + " step " + std::to_string(e.step_idx));
        last_step[ti] = e.step_idx;
        if (e.event_type == "eval") {
            if (has_eval[ti]) fail(errc::duplicate_terminal, e.run_id + "/" + e.task_id);
            has_eval[ti] = true;
            tasks[ti].eval = e;
        } else {
            if (has_eval[ti])
                fail(errc::invariant_violation,
                     e.run_id + "/" + e.task_id + ": row after terminal eval");
            tasks[ti].events.push_back(e);
        }
    }
    for (size_t i = 0; i < tasks.size(); ++i)
        if (!has_eval[i])
            fail(errc::missing_terminal, tasks[i].run_id + "/" + tasks[i].task_id);
    return tasks;
}

inline std::vector<TaskTrajectoryView> read_tasks(std::istream& in) {
    return read_tasks(read_events(in));
}

} // namespace skillforge
