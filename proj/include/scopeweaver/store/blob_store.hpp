#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace scopeweaver::store {

/// Content-addressed blobs under `<root>/blobs/<sha1-hex>`.
class BlobStore {
public:
  explicit BlobStore(std::filesystem::path root);

  /// Stores `bytes` and returns its SHA-1 key. Storing the same bytes again
  /// is a no-op. Throws StoreError on IO failure.
  std::string put(std::string_view bytes) const;

  /// Throws StoreError if the key is absent.
  std::string get(const std::string &sha1) const;

  bool contains(const std::string &sha1) const;

  /// Number of stored blobs.
  std::size_t size() const;

  const std::filesystem::path &dir() const noexcept { return dir_; }

private:
  std::filesystem::path dir_;
};

} // namespace scopeweaver::store
