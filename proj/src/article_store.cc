#include "stance/article_store.h"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "json.hpp"
#include "stance/errors.h"
#include "stance/fsutil.h"

namespace stance {

namespace fs = std::filesystem;
using json = nlohmann::json;

std::string article_to_json(const Article& a) {
  json j = {{"id", a.id},          {"date", a.published_at}, {"publisher", a.publisher},
            {"periodical", a.periodical}, {"title", a.title}, {"body", a.body}};
  if (!a.language.empty()) j["language"] = a.language;
  return j.dump();
}

Article article_from_json(const std::string& line) {
  const json j = json::parse(line);
  Article a;
  a.id = j.at("id").get<std::string>();
  a.published_at = j.at("date").get<std::string>();
  a.publisher = j.at("publisher").get<std::string>();
  a.periodical = j.value("periodical", "");
  a.title = j.value("title", "");
  a.body = j.at("body").get<std::string>();
  a.language = j.value("language", "");
  return a;
}

ArticleStore::ArticleStore(fs::path dir) : dir_(std::move(dir)) {
  const fs::path adir = dir_ / "articles";
  if (!fs::exists(adir)) return;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(adir)) {
    if (e.path().extension() == ".jsonl") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  for (const auto& file : files) {
    const std::string publisher = file.stem().string();
    const std::string content = read_file(file);
    std::unordered_map<std::string, std::size_t> offsets;
    std::size_t pos = 0;
    auto& list = by_publisher_[publisher];
    while (pos < content.size()) {
      auto nl = content.find('\n', pos);
      if (nl == std::string::npos) nl = content.size();
      const std::string line = content.substr(pos, nl - pos);
      if (!line.empty()) {
        Article a;
        try {
          a = article_from_json(line);
        } catch (const std::exception& e) {
          throw ValidationError("corrupt article store " + file.string() + " at byte " + std::to_string(pos) + ": " +
                                e.what());
        }
        offsets[a.id] = pos;
        publisher_of_[a.id] = publisher;
        list.push_back(std::move(a));
      }
      pos = nl + 1;
    }
    fs::path idx = file;
    idx.replace_extension(".idx");
    if (fs::exists(idx)) {
      std::istringstream in(read_file(idx));
      std::string id;
      std::size_t off = 0;
      std::size_t count = 0;
      while (in >> id >> off) {
        ++count;
        auto it = offsets.find(id);
        if (it == offsets.end() || it->second != off) {
          throw ValidationError("article index " + idx.string() + " disagrees with data for id " + id);
        }
      }
      if (count != offsets.size()) throw ValidationError("article index " + idx.string() + " is incomplete");
    }
  }
}

bool ArticleStore::insert(Article article) {
  std::unique_lock lock(mu_);
  if (publisher_of_.count(article.id)) return false;
  publisher_of_[article.id] = article.publisher;
  dirty_[article.publisher] = true;
  by_publisher_[article.publisher].push_back(std::move(article));
  return true;
}

bool ArticleStore::contains(const std::string& id) const {
  std::shared_lock lock(mu_);
  return publisher_of_.count(id) > 0;
}

std::optional<Article> ArticleStore::find(const std::string& id) const {
  std::shared_lock lock(mu_);
  auto it = publisher_of_.find(id);
  if (it == publisher_of_.end()) return std::nullopt;
  for (const auto& a : by_publisher_.at(it->second)) {
    if (a.id == id) return a;
  }
  return std::nullopt;
}

std::size_t ArticleStore::size() const {
  std::shared_lock lock(mu_);
  return publisher_of_.size();
}

std::vector<Article> ArticleStore::articles() const {
  std::shared_lock lock(mu_);
  std::vector<Article> out;
  for (const auto& [_, list] : by_publisher_) out.insert(out.end(), list.begin(), list.end());
  return out;
}

std::vector<std::string> ArticleStore::publishers() const {
  std::shared_lock lock(mu_);
  std::vector<std::string> out;
  for (const auto& [p, list] : by_publisher_) {
    if (!list.empty()) out.push_back(p);
  }
  return out;
}

void ArticleStore::flush() {
  std::unique_lock lock(mu_);
  if (dir_.empty()) return;
  for (auto& [publisher, dirty] : dirty_) {
    if (!dirty) continue;
    std::string data;
    std::string index;
    for (const auto& a : by_publisher_[publisher]) {
      index += a.id + "\t" + std::to_string(data.size()) + "\n";
      data += article_to_json(a);
      data += '\n';
    }
    const fs::path base = dir_ / "articles" / publisher;
    // Data first: an index that runs ahead of its data file is detected on load.
    atomic_write(base.string() + ".jsonl", data);
    atomic_write(base.string() + ".idx", index);
    dirty = false;
  }
}

Article ArticleStore::read_at(const fs::path& data_file, std::size_t offset) {
  std::ifstream in(data_file, std::ios::binary);
  in.seekg(static_cast<std::streamoff>(offset));
  std::string line;
  if (!std::getline(in, line)) throw ValidationError("no article at offset " + std::to_string(offset));
  return article_from_json(line);
}

}  // namespace stance
