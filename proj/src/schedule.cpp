#include "actcomp/schedule.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <sstream>

#include "actcomp/errors.hpp"

namespace actcomp {

namespace {

struct Event {
    double time;
    size_t seq; // tie-break so ordering is deterministic
    enum class Type { compute_done, arrive } type;
    size_t stage;
    size_t micro_batch;
};

struct EventLater {
    bool operator()(const Event& a, const Event& b) const {
        if (a.time != b.time) return a.time > b.time;
        return a.seq > b.seq;
    }
};

} // namespace

ScheduleResult pipeline_makespan_sim(size_t stages, size_t micro_batches,
                                     double stage_time, double hop_time) {
    if (stages < 1 || micro_batches < 1) {
        throw parameter_error("pipeline: stages and micro_batches must be at least 1");
    }
    if (stage_time < 0.0 || hop_time < 0.0) {
        throw parameter_error("pipeline: negative durations are not meaningful");
    }

    std::priority_queue<Event, std::vector<Event>, EventLater> pending;
    size_t seq = 0;

    // Per-stage state: when the stage frees up, and which micro-batches have
    // arrived (in order; stages consume them FIFO).
    std::vector<double> stage_free(stages, 0.0);
    std::vector<std::queue<std::pair<size_t, double>>> waiting(stages);
    std::vector<bool> busy(stages, false);

    ScheduleResult result;
    result.events.reserve(stages * micro_batches * 2);

    auto try_start = [&](size_t stage) {
        if (busy[stage] || waiting[stage].empty()) return;
        auto [mb, arrived] = waiting[stage].front();
        waiting[stage].pop();
        double start = std::max(stage_free[stage], arrived);
        busy[stage] = true;
        result.events.push_back({stage, mb, TimelineEvent::Kind::compute, start, stage_time});
        pending.push({start + stage_time, seq++, Event::Type::compute_done, stage, mb});
    };

    for (size_t mb = 0; mb < micro_batches; ++mb) waiting[0].push({mb, 0.0});
    try_start(0);

    double makespan = 0.0;
    while (!pending.empty()) {
        Event ev = pending.top();
        pending.pop();
        if (ev.type == Event::Type::compute_done) {
            stage_free[ev.stage] = ev.time;
            busy[ev.stage] = false;
            if (ev.stage + 1 < stages) {
                result.events.push_back({ev.stage, ev.micro_batch,
                                         TimelineEvent::Kind::comm, ev.time, hop_time});
                pending.push({ev.time + hop_time, seq++, Event::Type::arrive,
                              ev.stage + 1, ev.micro_batch});
            } else {
                makespan = std::max(makespan, ev.time);
            }
            try_start(ev.stage);
        } else {
            waiting[ev.stage].push({ev.micro_batch, ev.time});
            try_start(ev.stage);
        }
    }

    std::sort(result.events.begin(), result.events.end(),
              [](const TimelineEvent& a, const TimelineEvent& b) {
                  if (a.start != b.start) return a.start < b.start;
                  if (a.stage != b.stage) return a.stage < b.stage;
                  return a.micro_batch < b.micro_batch;
              });
    result.makespan = makespan;
    return result;
}

std::string timeline_to_json(const std::vector<TimelineEvent>& events) {
    std::ostringstream os;
    os.precision(17);
    os << "[";
    for (size_t i = 0; i < events.size(); ++i) {
        const TimelineEvent& e = events[i];
        os << (i ? ",\n " : "\n ") << "{\"stage\": " << e.stage
           << ", \"micro_batch\": " << e.micro_batch << ", \"kind\": \""
           << (e.kind == TimelineEvent::Kind::compute ? "compute" : "comm")
           << "\", \"start\": " << e.start << ", \"duration\": " << e.duration << "}";
    }
    os << "\n]\n";
    return os.str();
}

void write_trace_file(const std::string& path, const std::vector<TimelineEvent>& events) {
    std::ofstream os(path);
    if (!os) throw io_error("cannot open trace file '" + path + "' for writing");
    os << timeline_to_json(events);
    if (!os) throw io_error("write failed for trace file '" + path + "'");
}

} // namespace actcomp
