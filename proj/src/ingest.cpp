// Copyright 2026 The VRC Eval Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vrc/ingest.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

namespace vrc {
namespace {

// Iterates LF-terminated lines. A final line without a terminator is still
// yielded; a terminator at end of input does not produce an extra empty line.
class LineReader {
 public:
  explicit LineReader(std::string_view bytes) : rest_(bytes) {}

  bool next(std::string_view& line) {
    if (rest_.empty()) return false;
    const auto nl = rest_.find('\n');
    if (nl == std::string_view::npos) {
      line = rest_;
      rest_ = {};
    } else {
      line = rest_.substr(0, nl);
      rest_ = rest_.substr(nl + 1);
    }
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    ++number_;
    return true;
  }

  std::size_t number() const noexcept { return number_; }

 private:
  std::string_view rest_;
  std::size_t number_ = 0;
};

bool is_space(char c) { return c == ' ' || c == '\t' || c == '\r' || c == '\v' || c == '\f'; }

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && is_space(line[i])) ++i;
    const std::size_t start = i;
    while (i < line.size() && !is_space(line[i])) ++i;
    if (i > start) out.push_back(line.substr(start, i - start));
  }
  return out;
}

bool skippable(const std::vector<std::string_view>& fields) {
  return fields.empty() || fields.front().front() == '#';
}

[[noreturn]] void parse_fail(std::size_t line, const std::string& message) {
  throw Error(ErrorCode::kParse, message, line);
}

double parse_double(std::string_view token, std::size_t line, const char* what) {
  double value = 0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    parse_fail(line, std::string("malformed ") + what + " '" + std::string(token) + "'");
  }
  if (!std::isfinite(value)) {
    parse_fail(line, std::string("non-finite ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

long long parse_int(std::string_view token, std::size_t line, const char* what) {
  long long value = 0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    parse_fail(line, std::string("malformed ") + what + " '" + std::string(token) + "'");
  }
  return value;
}

BoundingBox parse_box(const std::vector<std::string_view>& f, std::size_t at, std::size_t line) {
  BoundingBox b{parse_double(f[at], line, "xmin"), parse_double(f[at + 1], line, "ymin"),
                parse_double(f[at + 2], line, "xmax"), parse_double(f[at + 3], line, "ymax")};
  if (!(b.xmax > b.xmin) || !(b.ymax > b.ymin)) {
    parse_fail(line, "degenerate box: xmax must exceed xmin and ymax must exceed ymin");
  }
  return b;
}

const CategoryId& require_category(std::string_view token, const std::set<CategoryId>& categories,
                                   std::size_t line) {
  auto it = categories.find(std::string(token));
  if (it == categories.end()) parse_fail(line, "unknown category id '" + std::string(token) + "'");
  return *it;
}

void append_box(std::string& out, const BoundingBox& b, char sep) {
  out += format_double(b.xmin);
  out += sep;
  out += format_double(b.ymin);
  out += sep;
  out += format_double(b.xmax);
  out += sep;
  out += format_double(b.ymax);
}

void check_line_count(std::size_t lines, std::size_t expected) {
  if (lines != expected) {
    throw Error(ErrorCode::kParse, "submission has " + std::to_string(lines) +
                                       " lines but the dataset has " + std::to_string(expected) +
                                       " images",
                lines + 1);
  }
}

}  // namespace

std::vector<ImageId> GroundTruthStore::image_order() const {
  std::vector<ImageId> out;
  out.reserve(images.size());
  for (const auto& [id, _] : images) out.push_back(id);
  return out;
}

std::set<ImageId> GroundTruthStore::image_ids() const {
  std::set<ImageId> out;
  for (const auto& [id, _] : images) out.insert(out.end(), id);
  return out;
}

std::size_t SubmissionRecord::detection_count() const {
  std::size_t n = 0;
  for (const auto& [_, dets] : detections) n += dets.size();
  return n;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw Error(ErrorCode::kInternal, "float formatting failed");
  return std::string(buf, ptr);
}

SubmissionRecord parse_classification_submission(std::string_view bytes,
                                                 const std::set<CategoryId>& categories,
                                                 const std::vector<ImageId>& image_order) {
  SubmissionRecord sub;
  sub.task = Task::kClassification;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.number();
    if (n > image_order.size()) {
      parse_fail(n, "submission has more lines than the dataset has images (" +
                        std::to_string(image_order.size()) + ")");
    }
    const auto fields = split_fields(line);
    if (fields.empty()) parse_fail(n, "line has no predictions");
    if (fields.size() > kMaxGuessesPerImage) {
      parse_fail(n, "line has " + std::to_string(fields.size()) + " labels; at most 5 allowed");
    }
    auto& labels = sub.labels[image_order[n - 1]];
    for (auto tok : fields) labels.push_back(require_category(tok, categories, n));
  }
  check_line_count(reader.number(), image_order.size());
  return sub;
}

SubmissionRecord parse_localization_submission(std::string_view bytes,
                                               const std::set<CategoryId>& categories,
                                               const std::vector<ImageId>& image_order) {
  SubmissionRecord sub;
  sub.task = Task::kLocalization;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    const auto n = reader.number();
    if (n > image_order.size()) {
      parse_fail(n, "submission has more lines than the dataset has images (" +
                        std::to_string(image_order.size()) + ")");
    }
    const auto fields = split_fields(line);
    if (fields.empty()) parse_fail(n, "line has no predictions");
    if (fields.size() % 5 != 0) {
      parse_fail(n, "expected groups of 5 fields (category xmin ymin xmax ymax), got " +
                        std::to_string(fields.size()) + " fields");
    }
    if (fields.size() / 5 > kMaxGuessesPerImage) {
      parse_fail(n, "line has " + std::to_string(fields.size() / 5) +
                        " predictions; at most 5 allowed");
    }
    auto& guesses = sub.localizations[image_order[n - 1]];
    for (std::size_t g = 0; g < fields.size(); g += 5) {
      guesses.push_back({require_category(fields[g], categories, n), parse_box(fields, g + 1, n)});
    }
  }
  check_line_count(reader.number(), image_order.size());
  return sub;
}

SubmissionRecord parse_detection_submission(std::string_view bytes,
                                            const std::set<CategoryId>& categories,
                                            const std::set<ImageId>& images) {
  SubmissionRecord sub;
  sub.task = Task::kDetection;
  LineReader reader(bytes);
  std::string_view line;
  ImageCategory key;
  std::vector<ScoredBox>* group = nullptr;
  while (reader.next(line)) {
    const auto n = reader.number();
    const auto f = split_fields(line);
    if (f.size() != 7) {
      parse_fail(n, "expected 7 fields (image_id category_id score xmin ymin xmax ymax), got " +
                        std::to_string(f.size()));
    }
    // Consecutive lines usually share a group; skip the map lookup then.
    if (group == nullptr || f[0] != key.first || f[1] != key.second) {
      if (images.find(std::string(f[0])) == images.end()) {
        parse_fail(n, "unknown image id '" + std::string(f[0]) + "'");
      }
      key = {std::string(f[0]), require_category(f[1], categories, n)};
      group = &sub.detections[key];
    }
    const double score = parse_double(f[2], n, "score");
    group->push_back({parse_box(f, 3, n), score});
  }
  return sub;
}

SubmissionRecord parse_submission(Task task, std::string_view bytes, const GroundTruthStore& truth,
                                  std::string team) {
  SubmissionRecord sub;
  switch (task) {
    case Task::kClassification:
      sub = parse_classification_submission(bytes, truth.categories, truth.image_order());
      break;
    case Task::kLocalization:
      sub = parse_localization_submission(bytes, truth.categories, truth.image_order());
      break;
    case Task::kDetection:
      sub = parse_detection_submission(bytes, truth.categories, truth.image_ids());
      break;
  }
  sub.team = std::move(team);
  return sub;
}

std::string write_classification_submission(const SubmissionRecord& sub,
                                            const std::vector<ImageId>& image_order) {
  std::string out;
  for (const auto& id : image_order) {
    auto it = sub.labels.find(id);
    if (it == sub.labels.end() || it->second.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "no predictions for image '" + id + "'");
    }
    for (std::size_t j = 0; j < it->second.size(); ++j) {
      if (j) out += ' ';
      out += it->second[j];
    }
    out += '\n';
  }
  return out;
}

std::string write_localization_submission(const SubmissionRecord& sub,
                                          const std::vector<ImageId>& image_order) {
  std::string out;
  for (const auto& id : image_order) {
    auto it = sub.localizations.find(id);
    if (it == sub.localizations.end() || it->second.empty()) {
      throw Error(ErrorCode::kInvalidArgument, "no predictions for image '" + id + "'");
    }
    for (std::size_t j = 0; j < it->second.size(); ++j) {
      if (j) out += ' ';
      out += it->second[j].label;
      out += ' ';
      append_box(out, it->second[j].box, ' ');
    }
    out += '\n';
  }
  return out;
}

std::string write_detection_submission(const SubmissionRecord& sub) {
  std::string out;
  for (const auto& [key, dets] : sub.detections) {
    for (const auto& d : dets) {
      out += key.first;
      out += ' ';
      out += key.second;
      out += ' ';
      out += format_double(d.score);
      out += ' ';
      append_box(out, d.box, ' ');
      out += '\n';
    }
  }
  return out;
}

GroundTruthStore parse_ground_truth(const GroundTruthFiles& files) {
  GroundTruthStore store;
  {
    LineReader reader(files.task);
    std::string_view line;
    std::vector<std::string_view> f;
    std::size_t at = 1;
    while (reader.next(line)) {
      const auto fields = split_fields(line);
      if (skippable(fields)) continue;
      if (!f.empty() || fields.size() != 1) {
        parse_fail(reader.number(), "task file must contain a single task name");
      }
      f = fields;
      at = reader.number();
    }
    if (f.empty()) parse_fail(1, "task file must contain a single task name");
    try {
      store.task = parse_task(f[0]);
    } catch (const Error& e) {
      parse_fail(at, e.what());
    }
  }

  LineReader images(files.images);
  std::string_view line;
  while (images.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = images.number();
    if (f.size() != 3) parse_fail(n, "images: expected `image_id width height`");
    const auto w = parse_int(f[1], n, "width");
    const auto h = parse_int(f[2], n, "height");
    if (w <= 0 || h <= 0 || w > INT32_MAX || h > INT32_MAX) {
      parse_fail(n, "images: width and height must be positive");
    }
    ImageRef ref{std::string(f[0]), static_cast<int>(w), static_cast<int>(h)};
    if (!store.images.emplace(ref.id, ref).second) {
      parse_fail(n, "images: duplicate image id '" + ref.id + "'");
    }
  }

  LineReader cats(files.categories);
  while (cats.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    if (f.size() != 1) parse_fail(cats.number(), "categories: expected one id per line");
    if (!store.categories.emplace(f[0]).second) {
      parse_fail(cats.number(), "categories: duplicate id '" + std::string(f[0]) + "'");
    }
  }

  auto require_image = [&](std::string_view id, std::size_t n, const char* where) {
    if (store.images.find(std::string(id)) == store.images.end()) {
      parse_fail(n, std::string(where) + ": unknown image id '" + std::string(id) + "'");
    }
  };

  LineReader labels(files.labels);
  while (labels.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = labels.number();
    if (f.size() != 2) parse_fail(n, "labels: expected `image_id category_id`");
    require_image(f[0], n, "labels");
    const auto& cat = require_category(f[1], store.categories, n);
    if (!store.labels.emplace(std::string(f[0]), cat).second) {
      parse_fail(n, "labels: duplicate label for image '" + std::string(f[0]) + "'");
    }
  }
  if (store.task != Task::kDetection) {
    for (const auto& [id, _] : store.images) {
      if (store.labels.find(id) == store.labels.end()) {
        throw Error(ErrorCode::kParse, "labels: image '" + id + "' has no label");
      }
    }
  } else if (!store.labels.empty()) {
    throw Error(ErrorCode::kParse, "labels: detection truth does not take per-image labels");
  }

  LineReader boxes(files.boxes);
  while (boxes.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = boxes.number();
    if (f.size() != 6) parse_fail(n, "boxes: expected `image_id category_id xmin ymin xmax ymax`");
    require_image(f[0], n, "boxes");
    const auto& cat = require_category(f[1], store.categories, n);
    store.boxes[{std::string(f[0]), cat}].push_back(parse_box(f, 2, n));
  }

  LineReader blacklist(files.blacklist);
  while (blacklist.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = blacklist.number();
    require_image(f[0], n, "blacklist");
    if (f.size() == 1) {
      store.blacklisted_images.emplace(f[0]);
    } else if (f.size() == 2) {
      const auto& cat = require_category(f[1], store.categories, n);
      store.blacklisted_pairs.emplace(std::string(f[0]), cat);
    } else {
      parse_fail(n, "blacklist: expected `image_id` or `image_id category_id`");
    }
  }
  return store;
}

GroundTruthFiles write_ground_truth(const GroundTruthStore& store) {
  GroundTruthFiles files;
  files.task = std::string(task_name(store.task)) + "\n";
  for (const auto& [id, ref] : store.images) {
    files.images += id + '\t' + std::to_string(ref.width) + '\t' + std::to_string(ref.height) + '\n';
  }
  for (const auto& c : store.categories) files.categories += c + '\n';
  for (const auto& [id, c] : store.labels) files.labels += id + '\t' + c + '\n';
  for (const auto& [key, list] : store.boxes) {
    for (const auto& b : list) {
      files.boxes += key.first + '\t' + key.second + '\t';
      append_box(files.boxes, b, '\t');
      files.boxes += '\n';
    }
  }
  for (const auto& id : store.blacklisted_images) files.blacklist += id + '\n';
  for (const auto& [id, c] : store.blacklisted_pairs) files.blacklist += id + '\t' + c + '\n';
  return files;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIo, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::kIo, "cannot write '" + path.string() + "'");
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
  if (!out) throw Error(ErrorCode::kIo, "short write to '" + path.string() + "'");
}

GroundTruthStore load_ground_truth(const std::filesystem::path& dir) {
  if (!std::filesystem::is_directory(dir)) {
    throw Error(ErrorCode::kIo, "ground-truth directory '" + dir.string() + "' not found");
  }
  auto optional = [&](const char* name) {
    const auto p = dir / name;
    return std::filesystem::exists(p) ? read_file(p) : std::string();
  };
  GroundTruthFiles files;
  files.task = read_file(dir / "task");
  files.images = read_file(dir / "images.tsv");
  files.categories = read_file(dir / "categories.txt");
  files.labels = optional("labels.tsv");
  files.boxes = optional("boxes.tsv");
  files.blacklist = optional("blacklist.tsv");
  try {
    return parse_ground_truth(files);
  } catch (const Error& e) {
    throw Error(e.code(), dir.string() + ": " + e.what());
  }
}

void save_ground_truth(const GroundTruthStore& store, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto files = write_ground_truth(store);
  write_file(dir / "task", files.task);
  write_file(dir / "images.tsv", files.images);
  write_file(dir / "categories.txt", files.categories);
  write_file(dir / "labels.tsv", files.labels);
  write_file(dir / "boxes.tsv", files.boxes);
  write_file(dir / "blacklist.tsv", files.blacklist);
}

SynsetGraph parse_hierarchy(std::string_view edges, std::string_view leaf_manifest) {
  std::vector<SynsetGraph::Edge> list;
  LineReader reader(edges);
  std::string_view line;
  while (reader.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    if (f.size() != 2) parse_fail(reader.number(), "hierarchy: expected `parent_id<TAB>child_id`");
    list.emplace_back(std::string(f[0]), std::string(f[1]));
  }
  std::vector<CategoryId> leaves;
  LineReader leaf_reader(leaf_manifest);
  while (leaf_reader.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    if (f.size() != 1) parse_fail(leaf_reader.number(), "leaf manifest: expected one id per line");
    leaves.emplace_back(f[0]);
  }
  return SynsetGraph(list, leaves);
}

std::pair<std::string, std::string> write_hierarchy(const SynsetGraph& graph) {
  std::pair<std::string, std::string> out;
  for (const auto& [p, c] : graph.edges()) out.first += p + '\t' + c + '\n';
  for (const auto& l : graph.leaves()) out.second += l + '\n';
  return out;
}

QuestionTreeSpec parse_question_tree(std::string_view bytes) {
  QuestionTreeSpec spec;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = reader.number();
    if (f[0] == "Q" && f.size() == 2) {
      spec.queries.emplace_back(f[1]);
    } else if (f[0] == "E" && f.size() == 3) {
      spec.edges.emplace_back(std::string(f[1]), std::string(f[2]));
    } else if (f[0] == "B" && f.size() == 3) {
      spec.bindings.emplace_back(std::string(f[1]), std::string(f[2]));
    } else {
      parse_fail(n, "question tree: expected `Q id`, `E parent child` or `B leaf category`");
    }
  }
  return spec;
}

std::string write_question_tree(const QuestionTreeSpec& spec) {
  std::string out;
  for (const auto& q : spec.queries) out += "Q\t" + q + '\n';
  for (const auto& [p, c] : spec.edges) out += "E\t" + p + '\t' + c + '\n';
  for (const auto& [q, c] : spec.bindings) out += "B\t" + q + '\t' + c + '\n';
  return out;
}

WindowRankings parse_window_rankings(std::string_view bytes, const std::set<ImageId>& images) {
  WindowRankings out;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = reader.number();
    if (f.size() != 6) parse_fail(n, "windows: expected `image_id rank xmin ymin xmax ymax`");
    if (!images.empty() && images.find(std::string(f[0])) == images.end()) {
      parse_fail(n, "windows: unknown image id '" + std::string(f[0]) + "'");
    }
    const auto rank = parse_int(f[1], n, "rank");
    if (rank < 1 || rank > 1000) parse_fail(n, "windows: rank must be in 1..1000");
    out[std::string(f[0])].push_back({static_cast<int>(rank), parse_box(f, 2, n)});
  }
  return out;
}

std::string write_window_rankings(const WindowRankings& windows) {
  std::string out;
  for (const auto& [id, list] : windows) {
    for (const auto& w : list) {
      out += id + ' ' + std::to_string(w.rank) + ' ';
      append_box(out, w.box, ' ');
      out += '\n';
    }
  }
  return out;
}

std::vector<PropertyAnnotation> parse_property_annotations(std::string_view bytes) {
  std::vector<PropertyAnnotation> out;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = reader.number();
    if (f.size() != 3) parse_fail(n, "properties: expected `category<TAB>property<TAB>bin`");
    const auto bin = parse_int(f[2], n, "bin");
    if (bin < 0 || bin > 1000) parse_fail(n, "properties: bin index out of range");
    out.push_back({std::string(f[0]), std::string(f[1]), static_cast<int>(bin)});
  }
  return out;
}

std::map<std::pair<int, int>, double> parse_confidence_table(std::string_view bytes) {
  std::map<std::pair<int, int>, double> table;
  LineReader reader(bytes);
  std::string_view line;
  while (reader.next(line)) {
    const auto f = split_fields(line);
    if (skippable(f)) continue;
    const auto n = reader.number();
    if (f.size() != 3) parse_fail(n, "confidence table: expected `yes_votes no_votes posterior`");
    const auto yes = parse_int(f[0], n, "yes count");
    const auto no = parse_int(f[1], n, "no count");
    const double p = parse_double(f[2], n, "posterior");
    if (yes < 0 || no < 0 || yes > 10000 || no > 10000) parse_fail(n, "vote counts out of range");
    if (p < 0 || p > 1) parse_fail(n, "posterior must lie in [0, 1]");
    if (!table.emplace(std::pair{static_cast<int>(yes), static_cast<int>(no)}, p).second) {
      parse_fail(n, "duplicate tally");
    }
  }
  return table;
}

std::string write_confidence_table(const std::map<std::pair<int, int>, double>& table) {
  std::string out;
  for (const auto& [tally, p] : table) {
    out += std::to_string(tally.first) + '\t' + std::to_string(tally.second) + '\t' +
           format_double(p) + '\n';
  }
  return out;
}

}  // namespace vrc
