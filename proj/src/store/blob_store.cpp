#include "scopeweaver/store/blob_store.hpp"

#include "scopeweaver/digest.hpp"
#include "scopeweaver/errors.hpp"
#include "scopeweaver/fileio.hpp"

namespace fs = std::filesystem;

namespace scopeweaver::store {

BlobStore::BlobStore(fs::path root) : dir_(std::move(root) / "blobs") {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec)
    throw StoreError("cannot create " + dir_.string() + ": " + ec.message());
}

std::string BlobStore::put(std::string_view bytes) const {
  std::string key = sha1_hex(bytes);
  const fs::path target = dir_ / key;
  if (fs::exists(target))
    return key;
  try {
    write_file_atomic(target, bytes);
  } catch (const IoError &e) {
    throw StoreError(e.what());
  }
  return key;
}

std::string BlobStore::get(const std::string &sha1) const {
  const fs::path p = dir_ / sha1;
  if (sha1.size() != 40 || !fs::exists(p))
    throw StoreError("no blob " + sha1);
  try {
    return read_file(p);
  } catch (const IoError &e) {
    throw StoreError(e.what());
  }
}

bool BlobStore::contains(const std::string &sha1) const {
  return sha1.size() == 40 && fs::exists(dir_ / sha1);
}

std::size_t BlobStore::size() const {
  std::size_t n = 0;
  for (const auto &entry : fs::directory_iterator(dir_))
    if (entry.is_regular_file() && entry.path().filename().string().size() == 40)
      ++n;
  return n;
}

} // namespace scopeweaver::store
