#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <shared_mutex>
#include <string>
#include <unordered_map>
#include <vector>

#include "stance/corpus.h"

namespace stance {

// Articles keyed by id, persisted as one JSONL file per publisher under
// <dir>/articles/ with a sidecar "<publisher>.idx" mapping id to the byte
// offset of its line. Readers may run concurrently; writers are serialized.
// An empty directory path gives a purely in-memory store.
class ArticleStore {
 public:
  ArticleStore() = default;
  // Loads any existing files. Throws ValidationError when a data file and its
  // index disagree.
  explicit ArticleStore(std::filesystem::path dir);

  ArticleStore(const ArticleStore&) = delete;
  ArticleStore& operator=(const ArticleStore&) = delete;

  // False (and no change) when the id is already present.
  bool insert(Article article);
  bool contains(const std::string& id) const;
  std::optional<Article> find(const std::string& id) const;
  std::size_t size() const;

  // All articles ordered by publisher name, then insertion order.
  std::vector<Article> articles() const;
  std::vector<std::string> publishers() const;

  // Rewrites the files of publishers changed since the last flush.
  void flush();

  // Reads the article whose line starts at `offset` in a publisher file.
  static Article read_at(const std::filesystem::path& data_file, std::size_t offset);

 private:
  std::filesystem::path dir_;
  mutable std::shared_mutex mu_;
  std::map<std::string, std::vector<Article>> by_publisher_;
  std::unordered_map<std::string, std::string> publisher_of_;
  std::map<std::string, bool> dirty_;
};

std::string article_to_json(const Article& a);
Article article_from_json(const std::string& line);

}  // namespace stance
