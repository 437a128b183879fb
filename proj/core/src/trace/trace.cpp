// Copyright 2026 The Rhyme Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "rhyme/trace/trace.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "rhyme/util/error.hpp"

namespace rhyme::trace {

Trace::Trace(std::vector<Response> responses) : responses_(std::move(responses)) {
  std::set<std::string, std::less<>> seen;
  std::set<std::int64_t> epochs;
  has_tokens_ = !responses_.empty();
  for (std::size_t i = 0; i < responses_.size(); ++i) {
    const auto& r = responses_[i];
    epochs.insert(r.epoch);
    if (seen.insert(r.prompt_id).second) prompts_.push_back(r.prompt_id);
    index_[r.epoch][r.prompt_id].push_back(i);
    if (!r.has_tokens()) has_tokens_ = false;
  }
  epochs_.assign(epochs.begin(), epochs.end());
}

bool Trace::has_epoch(std::int64_t epoch) const { return index_.contains(epoch); }

std::span<const std::size_t> Trace::group(std::int64_t epoch, std::string_view prompt_id) const {
  const auto e = index_.find(epoch);
  if (e == index_.end()) return {};
  const auto p = e->second.find(prompt_id);
  if (p == e->second.end()) return {};
  return p->second;
}

std::vector<std::string> Trace::prompts_in(std::int64_t epoch) const {
  std::vector<std::string> out;
  const auto e = index_.find(epoch);
  if (e == index_.end()) return out;
  for (const auto& p : prompts_) {
    if (e->second.contains(p)) out.push_back(p);
  }
  return out;
}

void write_jsonl(const Trace& trace, std::ostream& out) {
  for (const auto& r : trace.responses()) {
    nlohmann::ordered_json j;
    j["prompt_id"] = r.prompt_id;
    j["epoch"] = r.epoch;
    j["tokens"] = r.tokens;
    j["reward"] = r.reward;
    if (!r.has_tokens()) j["length"] = r.length;
    out << j.dump() << '\n';
  }
}

std::string to_jsonl(const Trace& trace) {
  std::ostringstream out;
  write_jsonl(trace, out);
  return out.str();
}

Trace read_jsonl(std::istream& in) {
  std::vector<Response> responses;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Response r;
      r.prompt_id = j.at("prompt_id").get<std::string>();
      r.epoch = j.at("epoch").get<std::int64_t>();
      r.tokens = j.at("tokens").get<std::vector<TokenId>>();
      r.reward = j.at("reward").get<double>();
      if (!std::isfinite(r.reward)) throw InputError("non-finite reward");
      if (r.epoch < 0) throw InputError("negative epoch");
      if (j.contains("length")) {
        r.length = j.at("length").get<std::int64_t>();
        if (!r.tokens.empty() && r.length != static_cast<std::int64_t>(r.tokens.size())) {
          throw InputError("length disagrees with tokens");
        }
      } else {
        r.length = static_cast<std::int64_t>(r.tokens.size());
      }
      if (r.length <= 0) throw InputError("empty response");
      responses.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw InputError("trace line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError& e) {
      throw InputError("trace line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return Trace(std::move(responses));
}

Trace load_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trace " + path.string());
  return read_jsonl(in);
}

}  // namespace rhyme::trace
