#include "daosim/container.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>

#include "daosim/crc32c.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace daosim::cont {

// ---------------------------------------------------------------------------
// Container ledger

void Container::check_handle(std::uint64_t handle) const {
  if (handles_.find(handle) == handles_.end())
    fail(Errc::StaleHandle, "container handle is closed");
}

namespace {

void require_rw(const std::map<std::uint64_t, Mode>& handles,
                std::uint64_t handle) {
  if (handles.at(handle) != Mode::ReadWrite)
    fail(Errc::ReadOnlyHandle, "operation needs a read-write handle");
}

}  // namespace

bool Container::tx_number_used_locked(Epoch n) const {
  return n <= used_through_ || ledger_.count(n) != 0;
}

Epoch Container::next_tx_locked() const {
  Epoch last = used_through_;
  if (!ledger_.empty()) last = std::max(last, ledger_.rbegin()->first);
  return last + 1;
}

void Container::recompute_committed_locked() {
  Epoch n = used_through_;
  while (true) {
    auto it = ledger_.find(n + 1);
    if (it == ledger_.end()) break;
    const TxState s = it->second;
    if (s != TxState::Finished && s != TxState::Aborted && s != TxState::Skipped)
      break;
    ++n;
  }
  committed_ = std::max(committed_, n);
}

void Container::tx_begin(std::uint64_t handle, Epoch n, bool attach) {
  std::lock_guard<std::mutex> lk(mu_);
  check_handle(handle);
  require_rw(handles_, handle);
  if (n == 0) fail(Errc::BadEpoch, "transaction numbers start at 1");
  if (attach) {
    auto it = ledger_.find(n);
    if (it == ledger_.end() || it->second != TxState::Open)
      fail(Errc::TxNotOpen,
           "transaction " + std::to_string(n) + " is not open to attach");
  } else {
    if (tx_number_used_locked(n))
      fail(Errc::DuplicateTransaction,
           "transaction number " + std::to_string(n) + " was already used");
    ledger_[n] = TxState::Open;
  }
}

void Container::tx_complete(std::uint64_t handle, Epoch n, bool aborted) {
  if (!aborted) {
    std::unique_lock<std::mutex> lk(mu_);
    check_handle(handle);
    auto it = ledger_.find(n);
    if (it == ledger_.end()) fail(Errc::TxNotOpen, "transaction is not open");
    cv_.wait(lk, [&] {
      return it->second != TxState::Open || inflight_.count(n) == 0;
    });
    if (it->second != TxState::Open)
      fail(Errc::TxNotOpen, "transaction is no longer open");
    it->second = TxState::Finished;
    recompute_committed_locked();
    cv_.notify_all();
    return;
  }

  // Two phases: close the transaction to new writes, expunge its epoch from
  // every target, only then mark it complete so no reader can observe a
  // committed version exposing aborted data.
  {
    std::unique_lock<std::mutex> lk(mu_);
    check_handle(handle);
    auto it = ledger_.find(n);
    if (it == ledger_.end() || it->second != TxState::Open)
      fail(Errc::TxNotOpen, "transaction is not open");
    it->second = TxState::AbortPending;
    cv_.wait(lk, [&] { return inflight_.count(n) == 0; });
  }
  pool_->fabric().erase_epoch(id_, n);
  {
    std::lock_guard<std::mutex> lk(mu_);
    ledger_[n] = TxState::Aborted;
    recompute_committed_locked();
  }
  cv_.notify_all();
}

void Container::tx_skip(std::uint64_t handle, Epoch n) {
  std::lock_guard<std::mutex> lk(mu_);
  check_handle(handle);
  require_rw(handles_, handle);
  if (n == 0) fail(Errc::BadEpoch, "transaction numbers start at 1");
  if (tx_number_used_locked(n))
    fail(Errc::DuplicateTransaction,
         "transaction number " + std::to_string(n) + " was already used");
  ledger_[n] = TxState::Skipped;
  recompute_committed_locked();
  cv_.notify_all();
}

cluster::ObjectLayout Container::layout_of(ObjectId oid) const {
  return pool_->fabric_.open_object(oid);
}

void Container::inflight_begin(std::uint64_t handle, Epoch n) {
  std::lock_guard<std::mutex> lk(mu_);
  check_handle(handle);
  auto it = ledger_.find(n);
  if (it == ledger_.end() || it->second != TxState::Open)
    fail(Errc::TxNotOpen, "transaction " + std::to_string(n) + " is not open");
  ++inflight_[n];
}

void Container::inflight_end(Epoch n) noexcept {
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = inflight_.find(n);
    if (it != inflight_.end() && --it->second == 0) inflight_.erase(it);
  }
  cv_.notify_all();
}

// ---------------------------------------------------------------------------
// TxContext

void TxContext::update(ObjectId oid, const Key& dkey, const Key& akey,
                       const Extent& extent, Bytes payload) {
  if (!valid()) fail(Errc::TxNotOpen, "empty transaction context");
  Container& c = *container_;
  c.inflight_begin(handle_, n_);
  try {
    if (payload.size() != extent.length)
      fail(Errc::BadExtent, "payload size disagrees with extent length");
    const std::uint32_t crc = crc32c(payload);
    ExtentWrite w{oid, dkey, akey, extent, std::move(payload), crc, n_};
    c.pool_->fabric().route_update(c.id_, c.layout_of(oid), w);
  } catch (...) {
    c.inflight_end(n_);
    throw;
  }
  c.inflight_end(n_);
}

void TxContext::punch(ObjectId oid, PunchScope scope, const Key& dkey,
                      const Key& akey) {
  if (!valid()) fail(Errc::TxNotOpen, "empty transaction context");
  Container& c = *container_;
  c.inflight_begin(handle_, n_);
  try {
    c.pool_->fabric().route_punch(c.id_, c.layout_of(oid), scope, dkey, akey, n_);
  } catch (...) {
    c.inflight_end(n_);
    throw;
  }
  c.inflight_end(n_);
}

void TxContext::finish() {
  if (!valid()) fail(Errc::TxNotOpen, "empty transaction context");
  container_->tx_complete(handle_, n_, /*aborted=*/false);
}

void TxContext::abort() {
  if (!valid()) fail(Errc::TxNotOpen, "empty transaction context");
  container_->tx_complete(handle_, n_, /*aborted=*/true);
}

// ---------------------------------------------------------------------------
// ContainerHandle

namespace {

Container& require(const std::shared_ptr<Container>& c) {
  if (!c) fail(Errc::StaleHandle, "container handle is not open");
  return *c;
}

}  // namespace

Uuid ContainerHandle::container_id() const {
  Container& c = require(container_);
  return c.id();
}

TxContext ContainerHandle::tx_start(Epoch n) {
  Container& c = require(container_);
  c.tx_begin(id_, n, /*attach=*/false);
  return TxContext(container_, id_, n);
}

TxContext ContainerHandle::tx_attach(Epoch n) {
  Container& c = require(container_);
  c.tx_begin(id_, n, /*attach=*/true);
  return TxContext(container_, id_, n);
}

void ContainerHandle::tx_skip(Epoch n) {
  Container& c = require(container_);
  c.tx_skip(id_, n);
}

Epoch ContainerHandle::next_tx() const {
  Container& c = require(container_);
  std::lock_guard<std::mutex> lk(c.mu_);
  c.check_handle(id_);
  return c.next_tx_locked();
}

Epoch ContainerHandle::version() const {
  Container& c = require(container_);
  std::lock_guard<std::mutex> lk(c.mu_);
  c.check_handle(id_);
  return c.committed_;
}

FetchResult ContainerHandle::read_at(Epoch version, ObjectId oid,
                                     const Key& dkey, const Key& akey,
                                     const Extent& extent) const {
  Container& c = require(container_);
  {
    std::lock_guard<std::mutex> lk(c.mu_);
    c.check_handle(id_);
    if (version > c.committed_)
      fail(Errc::VersionNotCommitted,
           "version " + std::to_string(version) + " is not committed");
  }
  return c.pool_->fabric().route_fetch(c.id_, c.layout_of(oid), oid, dkey, akey,
                                       extent, version);
}

std::vector<kv::KeyListing> ContainerHandle::list_at(Epoch version,
                                                     ObjectId oid) const {
  Container& c = require(container_);
  {
    std::lock_guard<std::mutex> lk(c.mu_);
    c.check_handle(id_);
    if (version > c.committed_)
      fail(Errc::VersionNotCommitted,
           "version " + std::to_string(version) + " is not committed");
  }
  return c.pool_->fabric().route_list(c.id_, c.layout_of(oid), version);
}

std::string ContainerHandle::persist(Epoch version) {
  Container& c = require(container_);
  std::lock_guard<std::mutex> lk(c.mu_);
  c.check_handle(id_);
  require_rw(c.handles_, id_);
  if (version > c.committed_)
    fail(Errc::VersionNotCommitted,
         "version " + std::to_string(version) + " is not committed");
  if (c.pool_->dir().empty())
    fail(Errc::BadConfig, "pool has no backing directory");
  const std::string path = c.pool_->image_path(c.id_);
  // An image already covering `version` stays put: overwriting it with an
  // older cut would lose reloadable versions.
  if (!(c.image_version_ && *c.image_version_ >= version)) {
    auto records = c.pool_->fabric().scan_container(c.id_, version);
    image::write(path, image::Image{c.id_, version, std::move(records)});
    c.image_version_ = version;
  }
  c.persisted_upto_ = std::max(c.persisted_upto_, version);
  return path;
}

Uuid ContainerHandle::snapshot(Epoch version, const std::string& name) {
  Container& c = require(container_);
  std::lock_guard<std::mutex> lk(c.mu_);
  c.check_handle(id_);
  require_rw(c.handles_, id_);
  if (version > c.committed_)
    fail(Errc::VersionNotCommitted,
         "version " + std::to_string(version) + " is not committed");
  if (c.persisted_upto_ < version)
    fail(Errc::NotPersisted,
         "snapshot requires persist through version " + std::to_string(version));
  auto records = c.pool_->fabric().flatten_container(c.id_, version);
  std::shared_ptr<Container> snap;
  {
    std::lock_guard<std::mutex> plk(c.pool_->mu_);
    snap = c.pool_->adopt_locked(name, random_uuid());
  }
  c.pool_->fabric().restore_container(snap->id(), records);
  c.snapshots_[name] = snap->id();
  return snap->id();
}

std::uint64_t ContainerHandle::aggregate(Epoch upto) {
  Container& c = require(container_);
  {
    std::lock_guard<std::mutex> lk(c.mu_);
    c.check_handle(id_);
    require_rw(c.handles_, id_);
    if (upto > c.committed_)
      fail(Errc::VersionNotCommitted,
           "version " + std::to_string(upto) + " is not committed");
  }
  return c.pool_->fabric().aggregate(c.id_, std::nullopt, upto);
}

void ContainerHandle::close() {
  if (!container_) return;
  {
    std::lock_guard<std::mutex> lk(container_->mu_);
    container_->handles_.erase(id_);
  }
  container_.reset();
}

// ---------------------------------------------------------------------------
// Pool

namespace {

std::mutex& registry_mu() {
  static std::mutex mu;
  return mu;
}

std::map<Uuid, std::weak_ptr<Pool>>& registry() {
  static std::map<Uuid, std::weak_ptr<Pool>> reg;
  return reg;
}

void write_text_atomic(const std::string& path, const std::string& text) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(Errc::IoError, "cannot create " + tmp);
    out << text;
    out.flush();
    if (!out) fail(Errc::IoError, "cannot write " + tmp);
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) fail(Errc::IoError, "cannot rename " + tmp + ": " + ec.message());
}

}  // namespace

Pool::Pool(Uuid id, std::uint32_t n_targets, std::string dir,
           std::uint64_t request_cost)
    : id_(id), dir_(std::move(dir)), fabric_(n_targets, request_cost) {}

Pool::~Pool() {
  std::lock_guard<std::mutex> lk(registry_mu());
  auto it = registry().find(id_);
  if (it != registry().end() && it->second.expired()) registry().erase(it);
}

std::shared_ptr<Pool> Pool::create(std::uint32_t n_targets,
                                   const std::string& dir,
                                   std::uint64_t request_cost) {
  if (n_targets == 0) fail(Errc::BadConfig, "pool needs at least one target");
  if (request_cost == 0) fail(Errc::BadConfig, "request cost must be positive");
  if (!dir.empty()) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) fail(Errc::IoError, "cannot create " + dir + ": " + ec.message());
  }
  auto pool = std::shared_ptr<Pool>(
      new Pool(random_uuid(), n_targets, dir, request_cost));
  {
    std::lock_guard<std::mutex> lk(pool->mu_);
    pool->save_manifest();
  }
  std::lock_guard<std::mutex> lk(registry_mu());
  registry()[pool->id_] = pool;
  return pool;
}

std::shared_ptr<Pool> Pool::connect(const Uuid& pool_id) {
  std::lock_guard<std::mutex> lk(registry_mu());
  auto it = registry().find(pool_id);
  std::shared_ptr<Pool> pool = it == registry().end() ? nullptr : it->second.lock();
  if (!pool) fail(Errc::UnknownPool, "pool " + pool_id.str() + " is not connected");
  return pool;
}

std::shared_ptr<Pool> Pool::load(const std::string& dir) {
  const std::string manifest_path = dir + "/manifest.json";
  std::ifstream in(manifest_path, std::ios::binary);
  if (!in) fail(Errc::IoError, "cannot open " + manifest_path);

  nlohmann::json manifest;
  try {
    in >> manifest;
    const Uuid id = Uuid::parse(manifest.at("pool_id").get<std::string>());
    const std::uint32_t targets = manifest.at("targets").get<std::uint32_t>();
    const std::uint64_t cost = manifest.value("request_cost", std::uint64_t{1});
    if (targets == 0) fail(Errc::BadConfig, "manifest has zero targets");

    auto pool = std::shared_ptr<Pool>(new Pool(id, targets, dir, cost));
    for (const auto& entry : manifest.at("containers")) {
      const std::string name = entry.at("name").get<std::string>();
      const Uuid cid = Uuid::parse(entry.at("uuid").get<std::string>());
      auto c = std::shared_ptr<Container>(new Container(pool.get(), cid, name));
      const std::string img_path = pool->image_path(cid);
      if (fs::exists(img_path)) {
        image::Image img = image::read(img_path);
        if (img.container_id != cid)
          fail(Errc::BadImage, "image identity disagrees with manifest");
        pool->fabric_.restore_container(cid, img.records);
        c->committed_ = img.committed_version;
        c->persisted_upto_ = img.committed_version;
        c->used_through_ = img.committed_version;
        c->image_version_ = img.committed_version;
      }
      pool->containers_[name] = std::move(c);
    }
    std::lock_guard<std::mutex> lk(registry_mu());
    registry()[pool->id_] = pool;
    return pool;
  } catch (const nlohmann::json::exception& e) {
    fail(Errc::BadConfig, std::string("malformed manifest: ") + e.what());
  }
}

std::string Pool::image_path(const Uuid& container_id) const {
  return dir_ + "/" + container_id.str() + ".img";
}

void Pool::save_manifest() const {
  if (dir_.empty()) return;
  nlohmann::json manifest;
  manifest["pool_id"] = id_.str();
  manifest["targets"] = fabric_.n_targets();
  manifest["request_cost"] = fabric_.request_cost();
  manifest["containers"] = nlohmann::json::array();
  for (const auto& [name, c] : containers_)
    manifest["containers"].push_back({{"name", name}, {"uuid", c->id().str()}});
  write_text_atomic(dir_ + "/manifest.json", manifest.dump(2) + "\n");
}

std::shared_ptr<Container> Pool::find(const std::string& name) const {
  std::lock_guard<std::mutex> lk(mu_);
  auto it = containers_.find(name);
  return it == containers_.end() ? nullptr : it->second;
}

std::shared_ptr<Container> Pool::adopt_locked(const std::string& name, Uuid id) {
  if (name.empty()) fail(Errc::BadKey, "container name must not be empty");
  if (containers_.count(name))
    fail(Errc::NameExists, "container name '" + name + "' is taken");
  auto c = std::shared_ptr<Container>(new Container(this, id, name));
  containers_[name] = c;
  save_manifest();
  return c;
}

Uuid Pool::container_create(const std::string& name) {
  std::lock_guard<std::mutex> lk(mu_);
  return adopt_locked(name, random_uuid())->id();
}

ContainerHandle Pool::container_open(const std::string& name, Mode mode) {
  auto c = find(name);
  if (!c) fail(Errc::UnknownContainer, "no container named '" + name + "'");
  std::lock_guard<std::mutex> lk(c->mu_);
  const std::uint64_t id = c->next_handle_++;
  c->handles_[id] = mode;
  return ContainerHandle(std::move(c), id, mode);
}

void Pool::container_delete(const std::string& name) {
  std::shared_ptr<Container> c;
  {
    std::lock_guard<std::mutex> lk(mu_);
    auto it = containers_.find(name);
    if (it == containers_.end())
      fail(Errc::UnknownContainer, "no container named '" + name + "'");
    c = std::move(it->second);
    containers_.erase(it);
    save_manifest();
  }
  {
    std::lock_guard<std::mutex> lk(c->mu_);
    c->handles_.clear();
  }
  fabric_.drop_container(c->id());
  if (!dir_.empty()) {
    std::error_code ec;
    fs::remove(image_path(c->id()), ec);
  }
}

bool Pool::has_container(const std::string& name) const {
  std::lock_guard<std::mutex> lk(mu_);
  return containers_.count(name) != 0;
}

std::vector<std::string> Pool::container_names() const {
  std::lock_guard<std::mutex> lk(mu_);
  std::vector<std::string> out;
  out.reserve(containers_.size());
  for (const auto& [name, c] : containers_) out.push_back(name);
  return out;
}

Uuid Pool::container_load_image(const std::string& image_path_in,
                                const std::string& name) {
  image::Image img = image::read(image_path_in);
  std::shared_ptr<Container> c;
  {
    std::lock_guard<std::mutex> lk(mu_);
    // fresh identity so the same image can be loaded more than once
    c = adopt_locked(name, random_uuid());
  }
  fabric_.restore_container(c->id(), img.records);
  {
    std::lock_guard<std::mutex> lk(c->mu_);
    c->committed_ = img.committed_version;
    c->used_through_ = img.committed_version;
    if (!dir_.empty()) {
      image::write(image_path(c->id()),
                   image::Image{c->id(), img.committed_version, img.records});
      c->persisted_upto_ = img.committed_version;
      c->image_version_ = img.committed_version;
    }
  }
  return c->id();
}

}  // namespace daosim::cont
