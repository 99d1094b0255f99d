#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace actcomp {

struct TimelineEvent {
    enum class Kind { compute, comm };
    size_t stage = 0;       // comm events: the sending stage
    size_t micro_batch = 0;
    Kind kind = Kind::compute;
    double start = 0.0;
    double duration = 0.0;
};

struct ScheduleResult {
    double makespan = 0.0;
    std::vector<TimelineEvent> events;
};

// Event-driven fill-drain pipeline: every micro-batch visits the stages in
// order, a stage processes one micro-batch at a time for stage_time, and each
// hop to the next stage takes hop_time on a link that does not serialize
// transfers. The makespan therefore matches the closed form
// (m + n - 1) * stage_time + (n - 1) * hop_time; this engine derives it from
// events rather than assuming it.
ScheduleResult pipeline_makespan_sim(size_t stages, size_t micro_batches,
                                     double stage_time, double hop_time);

// Timeline as a JSON array of {stage, micro_batch, kind, start, duration},
// one event per entry.
std::string timeline_to_json(const std::vector<TimelineEvent>& events);
void write_trace_file(const std::string& path, const std::vector<TimelineEvent>& events);

} // namespace actcomp
