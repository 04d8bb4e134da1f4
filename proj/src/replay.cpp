#include <fingerfab/production.hpp>

#include <map>
#include <sstream>

namespace fingerfab {
namespace {

// Milestones of one finger, in required order.
constexpr const char* kMilestones[] = {"base_picked", "inserted_locked", "print_started",
                                       "print_finished", "stored_in_qfe"};

int milestone_rank(const std::string& action) {
  for (int i = 0; i < 5; ++i) {
    if (action == kMilestones[i]) return i;
  }
  return -1;
}

struct FingerTrace {
  int last_rank = -1;
  bool failed_print = false;
  std::optional<double> first_skill_begin;
  std::map<int, double> at;  // rank -> time (latest)
  std::string printer;
  std::string terminal;  // finger_ready | finger_failed
};

std::string fmt_time(double t) {
  std::ostringstream out;
  out << t;
  return out.str();
}

ReplayVerdict violation(std::string what) { return {false, std::move(what)}; }

}  // namespace

ReplayVerdict replay_log(const std::vector<ProductionEvent>& events) {
  std::map<std::string, FingerTrace> fingers;
  std::vector<std::pair<std::string, std::string>> pairs;
  std::optional<std::string> robot_holder;  // finger whose skill is running
  std::map<Actor, std::string> printer_job;
  std::size_t bases_picked = 0;

  for (std::size_t i = 0; i < events.size(); ++i) {
    const auto& e = events[i];
    const std::string where = "event " + std::to_string(i) + " (" + e.action + " " + e.subject + " @" +
                              fmt_time(e.time) + "): ";
    if (i > 0 && e.time < events[i - 1].time) {
      return violation(where + "time goes backwards from " + fmt_time(events[i - 1].time));
    }

    if (e.action == "pair_requested") {
      const auto comma = e.subject.find(',');
      if (comma == std::string::npos) return violation(where + "pair subject must be 'first,second'");
      pairs.emplace_back(e.subject.substr(0, comma), e.subject.substr(comma + 1));
      continue;
    }

    auto& f = fingers[e.subject];

    if (e.actor == Actor::robot_A) {
      if (e.action.rfind("skill_begin:", 0) == 0) {
        if (robot_holder) return violation(where + "robot_A already executing a skill for " + *robot_holder);
        robot_holder = e.subject;
        if (!f.first_skill_begin) f.first_skill_begin = e.time;
      } else if (e.action.rfind("skill_end:", 0) == 0 || e.action.rfind("skill_failed:", 0) == 0) {
        if (robot_holder != e.subject) return violation(where + "skill end without matching begin");
        robot_holder.reset();
      }
      continue;
    }

    if (e.action == "print_started" || e.action == "print_finished" || e.action == "print_failed") {
      if (e.actor != Actor::printer_A && e.actor != Actor::printer_B) {
        return violation(where + "print events must come from a printer");
      }
      auto& current = printer_job[e.actor];
      if (e.action == "print_started") {
        if (!current.empty()) return violation(where + std::string(actor_name(e.actor)) + " already printing " + current);
        current = e.subject;
        f.printer = actor_name(e.actor);
      } else {
        if (current != e.subject) {
          return violation(where + std::string(actor_name(e.actor)) + " was not printing " + e.subject);
        }
        current.clear();
      }
      if (e.action == "print_failed") {
        f.failed_print = true;
        continue;
      }
    }

    if (const int rank = milestone_rank(e.action); rank >= 0) {
      const bool restart = rank == 2 && f.failed_print && f.last_rank == 2;
      if (rank != f.last_rank + 1 && !restart) {
        const std::string expected = f.last_rank + 1 < 5 ? kMilestones[f.last_rank + 1] : "nothing";
        if (rank <= f.last_rank) {
          return violation(where + e.action + " repeated or out of order after " + kMilestones[f.last_rank]);
        }
        return violation(where + e.action + " before " + expected);
      }
      f.failed_print = false;
      f.last_rank = rank;
      f.at[rank] = e.time;
      if (rank == 0) ++bases_picked;
      continue;
    }

    if (e.action == "finger_ready" || e.action == "finger_failed") {
      if (!f.terminal.empty()) return violation(where + "finger already finished as " + f.terminal);
      if (e.action == "finger_ready" && f.last_rank != 4) {
        return violation(where + "finger_ready without stored_in_qfe");
      }
      f.terminal = e.action;
    }
  }

  if (robot_holder) return violation("log ends while robot_A executes a skill for " + *robot_holder);
  for (const auto& [actor, job] : printer_job) {
    if (!job.empty()) return violation(std::string("log ends while ") + actor_name(actor) + " prints " + job);
  }

  // Every consumed base ends in exactly one record.
  std::size_t consumed_records = 0;
  for (const auto& [id, f] : fingers) {
    if (f.last_rank >= 0) {
      if (f.terminal.empty()) return violation(id + " took a base but never finished");
      ++consumed_records;
    }
  }
  if (consumed_records != bases_picked) {
    return violation("inventory: " + std::to_string(bases_picked) + " bases picked but " +
                     std::to_string(consumed_records) + " records consumed a base");
  }

  for (const auto& [a_id, b_id] : pairs) {
    const auto a_it = fingers.find(a_id);
    const auto b_it = fingers.find(b_id);
    if (a_it == fingers.end() || b_it == fingers.end()) continue;
    const auto& a = a_it->second;
    const auto& b = b_it->second;
    if (!a.at.count(2) || !b.at.count(0)) continue;
    const double a_start = a.at.at(2);
    const double b_pick = b.at.at(0);
    if (b_pick < a_start) {
      return violation("pair " + a_id + "," + b_id + ": " + b_id + " base picked at " + fmt_time(b_pick) +
                       " before " + a_id + " print started at " + fmt_time(a_start));
    }
    if (a.at.count(3) && b.at.count(1) && b.first_skill_begin) {
      const double a_duration = a.at.at(3) - a_start;
      const double b_handling = b.at.at(1) - *b.first_skill_begin;
      if (a_duration > b_handling && b_pick > a.at.at(3)) {
        return violation("pair " + a_id + "," + b_id + ": " + b_id + " base picked at " + fmt_time(b_pick) +
                         " after " + a_id + " print finished at " + fmt_time(a.at.at(3)));
      }
    }
  }
  return {};
}

}  // namespace fingerfab
