#include "aepo/env.hpp"

#include <cassert>
#include <cmath>
#include <fstream>
#include <numeric>

#include <json.hpp>

#include "aepo/parallel.hpp"

namespace aepo::env {

namespace {

using rng::Engine;

constexpr double kCellPad = 2.0;      // gap kept inside every cell border
constexpr double kMinElementPx = 4.0;

int signal_dims(int feature_dim) { return feature_dim - feature_dim / 2; }

// Fills f[from, to) with a unit gaussian direction; other entries untouched.
void fill_unit_span(std::vector<double>& f, int from, int to, Engine& rng) {
  double norm2 = 0.0;
  while (norm2 == 0.0) {
    for (int i = from; i < to; ++i) {
      f[static_cast<std::size_t>(i)] = rng::next_gaussian(rng);
      norm2 += f[static_cast<std::size_t>(i)] * f[static_cast<std::size_t>(i)];
    }
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (int i = from; i < to; ++i) f[static_cast<std::size_t>(i)] *= inv;
}

double dot_span(const std::vector<double>& a, const std::vector<double>& b,
                int from, int to) {
  double s = 0.0;
  for (int i = from; i < to; ++i) {
    s += a[static_cast<std::size_t>(i)] * b[static_cast<std::size_t>(i)];
  }
  return s;
}

void place_grid(Task& task, Engine& rng) {
  const int m = static_cast<int>(task.elements.size());
  const int cols = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
  const int rows = (m + cols - 1) / cols;
  const double cell_w = task.width / cols;
  const double cell_h = task.height / rows;
  const double avail_w = cell_w - 2.0 * kCellPad;
  const double avail_h = cell_h - 2.0 * kCellPad;
  if (avail_w < kMinElementPx || avail_h < kMinElementPx) {
    throw ConfigError("elements cannot be placed without overlap");
  }

  std::vector<int> cells(static_cast<std::size_t>(rows * cols));
  std::iota(cells.begin(), cells.end(), 0);
  rng::shuffle(cells, rng);

  for (int j = 0; j < m; ++j) {
    const int cell = cells[static_cast<std::size_t>(j)];
    const double cx = (cell % cols) * cell_w + kCellPad;
    const double cy = (cell / cols) * cell_h + kCellPad;
    const double w = avail_w * rng::next_uniform(rng, 0.35, 0.8);
    const double h = avail_h * rng::next_uniform(rng, 0.35, 0.8);
    const double x0 = cx + rng::next_uniform(rng, 0.0, avail_w - w);
    const double y0 = cy + rng::next_uniform(rng, 0.0, avail_h - h);
    task.elements[static_cast<std::size_t>(j)].bbox = {x0, y0, x0 + w, y0 + h};
  }
}

// One horizontal strip of elements whose centers share the same y (up to fp
// rounding), so any three centers form a degenerate triangle. When
// `offset_target` is set, the target element is pushed well off the strip so
// that triples containing it are never collinear: sweeping the strip then
// covers every element except the one that matters.
void place_row(Task& task, bool offset_target, Engine& rng) {
  const int m = static_cast<int>(task.elements.size());
  const double cell_w = task.width / m;
  const double avail_w = cell_w - 2.0 * kCellPad;
  if (avail_w < kMinElementPx) {
    throw ConfigError("elements cannot be placed without overlap");
  }
  const double yc = task.height * rng::next_uniform(rng, 0.3, 0.7);
  const double h_cap = 1.8 * std::min(yc, task.height - yc);
  for (int j = 0; j < m; ++j) {
    const double w = avail_w * rng::next_uniform(rng, 0.35, 0.8);
    const double h =
        std::min(task.height * rng::next_uniform(rng, 0.12, 0.3), h_cap);
    double y_mid = yc;
    if (offset_target && j == task.target) {
      // One fifth of the screen away from the strip, toward the larger side.
      const double shift = 0.2 * task.height;
      y_mid = yc < 0.5 * task.height ? yc + shift : yc - shift;
    }
    const double x0 =
        j * cell_w + kCellPad + rng::next_uniform(rng, 0.0, avail_w - w);
    task.elements[static_cast<std::size_t>(j)].bbox = {x0, y_mid - h / 2.0,
                                                       x0 + w, y_mid + h / 2.0};
  }
}

nlohmann::json task_to_json(const Task& task) {
  nlohmann::json elements = nlohmann::json::array();
  for (const auto& e : task.elements) {
    elements.push_back({
        {"bbox", {e.bbox.x_min, e.bbox.y_min, e.bbox.x_max, e.bbox.y_max}},
        {"feature", e.feature},
    });
  }
  return {
      {"width", task.width},
      {"height", task.height},
      {"elements", std::move(elements)},
      {"instruction", task.instruction},
      {"target", task.target},
      {"layout", task.layout == Layout::row ? "row" : "grid"},
      {"trap_gap", task.trap_gap},
  };
}

void require_keys(const nlohmann::json& obj,
                  std::initializer_list<const char*> keys,
                  const char* what) {
  for (const char* key : keys) {
    if (!obj.contains(key)) {
      throw SchemaError(std::string(what) + ": missing key '" + key + "'");
    }
  }
  if (obj.size() != keys.size()) {
    throw SchemaError(std::string(what) + ": unexpected extra keys");
  }
}

Task task_from_json_impl(const nlohmann::json& j) {
  if (!j.is_object()) throw SchemaError("task: not an object");
  require_keys(j, {"width", "height", "elements", "instruction", "target",
                   "layout", "trap_gap"},
               "task");
  Task t;
  t.width = j.at("width").get<double>();
  t.height = j.at("height").get<double>();
  t.instruction = j.at("instruction").get<std::vector<double>>();
  t.target = j.at("target").get<int>();
  const std::string layout = j.at("layout").get<std::string>();
  if (layout == "grid") {
    t.layout = Layout::grid;
  } else if (layout == "row") {
    t.layout = Layout::row;
  } else {
    throw SchemaError("task: unknown layout '" + layout + "'");
  }
  t.trap_gap = j.at("trap_gap").get<double>();
  const auto& elements = j.at("elements");
  if (!elements.is_array() || elements.empty()) {
    throw SchemaError("task: elements must be a non-empty array");
  }
  for (const auto& ej : elements) {
    require_keys(ej, {"bbox", "feature"}, "task element");
    const auto bbox = ej.at("bbox").get<std::vector<double>>();
    if (bbox.size() != 4) throw SchemaError("task element: bbox needs 4 values");
    Element e;
    e.bbox = {bbox[0], bbox[1], bbox[2], bbox[3]};
    e.feature = ej.at("feature").get<std::vector<double>>();
    if (e.feature.size() != t.instruction.size()) {
      throw SchemaError("task element: feature dim != instruction dim");
    }
    t.elements.push_back(std::move(e));
  }
  if (t.target < 0 || t.target >= static_cast<int>(t.elements.size())) {
    throw SchemaError("task: target out of range");
  }
  return t;
}

Task task_from_json(const nlohmann::json& j) {
  try {
    return task_from_json_impl(j);
  } catch (const nlohmann::json::exception&) {
    throw SchemaError("task: field has the wrong JSON type");
  }
}

}  // namespace

void validate(const EnvConfig& cfg) {
  if (cfg.width < 100.0 || cfg.height < 100.0) {
    throw ConfigError("screen must be at least 100x100");
  }
  if (cfg.elements < 2 || cfg.elements > 50) {
    throw ConfigError("elements must be in [2, 50]");
  }
  if (cfg.feature_dim < 2) throw ConfigError("feature_dim must be >= 2");
  if (cfg.row_prob < 0.0 || cfg.row_prob > 1.0) {
    throw ConfigError("row_prob must be in [0, 1]");
  }
  if (cfg.trap_prob < 0.0 || cfg.trap_prob > 1.0) {
    throw ConfigError("trap_prob must be in [0, 1]");
  }
  if (cfg.trap_gap <= 0.0) throw ConfigError("trap_gap must be positive");
  if (cfg.trap_gap_jitter < 0.0) {
    throw ConfigError("trap_gap_jitter must be >= 0");
  }
  if (cfg.target_margin <= 0.0) {
    throw ConfigError("target_margin must be positive");
  }
  if (cfg.margin_jitter < 0.0 || cfg.margin_jitter >= 1.0) {
    throw ConfigError("margin_jitter must be in [0, 1)");
  }
}

double base_similarity(const Task& task, int j) {
  const auto& f = task.elements[static_cast<std::size_t>(j)].feature;
  return dot_span(task.instruction, f, 0, static_cast<int>(f.size()));
}

Task generate_task(rng::Engine& rng, const EnvConfig& cfg) {
  validate(cfg);
  const int m = cfg.elements;
  const int d = cfg.feature_dim;
  const int ds = signal_dims(d);

  Task task;
  task.width = cfg.width;
  task.height = cfg.height;
  task.elements.resize(static_cast<std::size_t>(m));
  task.layout = rng::next_unit(rng) < cfg.row_prob ? Layout::row : Layout::grid;
  task.target = rng::next_index(rng, m);
  for (auto& e : task.elements) {
    e.feature.assign(static_cast<std::size_t>(d), 0.0);
    fill_unit_span(e.feature, 0, ds, rng);
  }
  // Near-parallel distractors would make the margin boost below unbounded.
  const auto& ft = task.elements[static_cast<std::size_t>(task.target)].feature;
  for (int j = 0; j < m; ++j) {
    if (j == task.target) continue;
    auto& fj = task.elements[static_cast<std::size_t>(j)].feature;
    while (dot_span(fj, ft, 0, ds) > 0.95) {
      fill_unit_span(fj, 0, ds, rng);
    }
  }

  // Instruction: noisy copy of the target feature on the signal dims plus a
  // unit direction on the bait dims.
  task.instruction.assign(static_cast<std::size_t>(d), 0.0);
  for (int i = 0; i < ds; ++i) {
    task.instruction[static_cast<std::size_t>(i)] =
        ft[static_cast<std::size_t>(i)] + 0.5 * rng::next_gaussian(rng);
  }
  if (ds < d) fill_unit_span(task.instruction, ds, d, rng);

  // Boost the instruction along the target feature until the target wins the
  // base similarity by the drawn margin.
  const double margin =
      cfg.target_margin *
      (1.0 + cfg.margin_jitter * rng::next_uniform(rng, -1.0, 1.0));
  const double st = dot_span(task.instruction, ft, 0, ds);
  double boost = 0.0;
  for (int j = 0; j < m; ++j) {
    if (j == task.target) continue;
    const auto& fj = task.elements[static_cast<std::size_t>(j)].feature;
    const double sj = dot_span(task.instruction, fj, 0, ds);
    const double rho = dot_span(ft, fj, 0, ds);
    boost = std::max(boost, (sj + margin - st) / (1.0 - rho));
  }
  if (boost > 0.0) {
    for (int i = 0; i < ds; ++i) {
      task.instruction[static_cast<std::size_t>(i)] +=
          boost * ft[static_cast<std::size_t>(i)];
    }
  }

  // Confidence trap: decorate every distractor with bait aligned with the
  // instruction's bait direction (which has unit norm), burying the target at
  // the bottom of the similarity ordering. One distractor — the trap — is
  // lifted to exactly target + gap; the rest land between 0.4·gap and
  // 0.8·gap above the target. A single-answer sampler therefore almost never
  // sees the target, while a multi-answer rollout reaches it at a deep rank.
  if (ds < d && rng::next_unit(rng) < cfg.trap_prob) {
    int trap = rng::next_index(rng, m - 1);
    if (trap >= task.target) ++trap;
    const double gap =
        cfg.trap_gap * (1.0 + cfg.trap_gap_jitter * rng::next_unit(rng));
    const double target_sim = base_similarity(task, task.target);
    for (int j = 0; j < m; ++j) {
      if (j == task.target) continue;
      const double level =
          j == trap ? gap : gap * rng::next_uniform(rng, 0.4, 0.8);
      const double lift = target_sim + level - base_similarity(task, j);
      auto& fj = task.elements[static_cast<std::size_t>(j)].feature;
      for (int i = ds; i < d; ++i) {
        fj[static_cast<std::size_t>(i)] +=
            lift * task.instruction[static_cast<std::size_t>(i)];
      }
    }
    task.trap_gap = gap;
  }

  // Geometry goes last: trap rows hide the target off the strip, so placement
  // depends on the trap decision above.
  if (task.layout == Layout::row) {
    place_row(task, task.trap_gap > 0.0, rng);
  } else {
    place_grid(task, rng);
  }
  return task;
}

std::vector<Task> generate_dataset(std::uint64_t seed, int count,
                                   const EnvConfig& cfg) {
  validate(cfg);
  if (count < 1) throw ConfigError("dataset count must be >= 1");
  std::vector<Task> tasks(static_cast<std::size_t>(count));
  par::parallel_for(static_cast<std::size_t>(count), [&](std::size_t i) {
    rng::Engine engine = rng::make_engine(seed, 0x7461736bull, i);
    tasks[i] = generate_task(engine, cfg);
  });
  return tasks;
}

const char* difficulty_name(DifficultyLabel label) {
  switch (label) {
    case DifficultyLabel::easy: return "easy";
    case DifficultyLabel::middle: return "middle";
    case DifficultyLabel::hard: return "hard";
  }
  return "unknown";
}

std::string task_to_json_line(const Task& task) {
  return task_to_json(task).dump();
}

Task task_from_json_line(const std::string& line) {
  const nlohmann::json j = nlohmann::json::parse(line, nullptr, false);
  if (j.is_discarded()) throw SchemaError("task: invalid JSON line");
  return task_from_json(j);
}

void write_tasks_jsonl(const std::string& path,
                       const std::vector<Task>& tasks) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (const auto& t : tasks) {
    out << task_to_json_line(t) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

std::vector<Task> read_tasks_jsonl(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<Task> tasks;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      tasks.push_back(task_from_json_line(line));
    } catch (const SchemaError& e) {
      throw SchemaError(path + ":" + std::to_string(line_no) + ": " +
                        e.what());
    }
  }
  return tasks;
}

}  // namespace aepo::env
