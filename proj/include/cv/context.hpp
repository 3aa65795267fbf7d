// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "cv/config_store.hpp"
#include "cv/spec.hpp"
#include "cv/store_handle.hpp"
#include "cv/typed_value.hpp"

namespace cv {

/// Layer name to value. A layer with an empty value is inactive.
using LayerMap = std::unordered_map<std::string, std::string>;

struct Evaluation {
  /// Key with every placeholder substituted (inactive layers become `*`).
  /// This is where assignments are written.
  std::string key;
  TypedValue value;
  /// Entry the value came from; empty when the default was used.
  std::string matched_key;
};

/// Looks up `spec` under `layers`. When the substituted key is missing,
/// substituted positions fall back to `*` one at a time from the right
/// (rightmost, then the two rightmost, ...), then the spec default applies.
/// Throws TypeError if the found text does not convert to the spec's type.
Evaluation evaluate(const CVSpec& spec, const LayerMap& layers, const ConfigStore& store);

class Context;

/// A contextual value: a typed cache kept coherent with the layers and the
/// store of the Context it is registered with. Reading is a plain member
/// access; all work happens in Context operations.
class ContextualValue {
 public:
  explicit ContextualValue(CVSpec spec);
  /// Registers with `ctx` immediately.
  ContextualValue(Context& ctx, CVSpec spec);
  ~ContextualValue();

  ContextualValue(const ContextualValue&) = delete;
  ContextualValue& operator=(const ContextualValue&) = delete;

  const TypedValue& read() const noexcept { return cache_; }
  template <class T>
  const T& get() const {
    return std::get<T>(cache_);
  }
  std::string text() const { return to_text(cache_); }

  const CVSpec& spec() const noexcept { return spec_; }
  const std::string& layer_name() const noexcept { return spec_.layer_name; }
  const std::string& current_key() const noexcept { return current_key_; }
  bool activated() const noexcept { return activated_; }
  Context* context() const noexcept { return ctx_; }

 private:
  friend class Context;

  CVSpec spec_;
  TypedValue cache_;
  std::string current_key_;
  bool activated_ = false;
  Context* ctx_ = nullptr;
  std::size_t rank_ = 0;
  std::uint64_t updated_epoch_ = 0;
  bool queued_ = false;
};

/// A `with` binding: a named layer and its value, or a contextual value
/// contributing (its layer name, its current text).
struct Activation {
  Activation(std::string layer_name, std::string layer_value)
      : layer(std::move(layer_name)), value(std::move(layer_value)) {}
  Activation(const ContextualValue& cv) : layer(cv.layer_name()), value(cv.text()) {}  // NOLINT

  std::string layer;
  std::string value;
};

/// Called as hook(layer, old value, new value) whenever a layer changes.
using Hook = std::function<void(const std::string&, const std::string&, const std::string&)>;

/// The layers, registered contextual values and working store of one
/// thread. Changes propagate to dependent values in topological order,
/// only inside the operations below; reads never trigger work.
///
/// Not thread-safe. Other threads and processes reach this context only
/// through the persistent store and sync().
class Context {
 public:
  struct Options {
    /// Reject cyclic registrations up front. Turning this off leaves only
    /// the propagation-time guard.
    bool check_cycles = true;
  };

  Context();
  explicit Context(StorePtr store);
  Context(StorePtr store, Options options);
  ~Context();

  Context(const Context&) = delete;
  Context& operator=(const Context&) = delete;

  /// Registers `cv`, evaluates it, and recomputes the update order.
  /// Throws if another value already observes the same layer, or on cycles.
  void add(ContextualValue& cv);
  void remove(ContextualValue& cv) noexcept;

  /// `cv` starts providing its layer. Registers `cv` if needed.
  void activate(ContextualValue& cv);
  /// Throws if `cv` is not activated.
  void deactivate(ContextualValue& cv);
  /// Writes `value` to the working store at cv's current key, updates its
  /// cache, and (if activated) its layer. Not persisted until persist().
  void assign(ContextualValue& cv, TypedValue value);
  void assign_text(ContextualValue& cv, std::string_view text);

  /// Named layers not backed by a contextual value.
  void activate_layer(const std::string& name, std::string value);
  void deactivate_layer(const std::string& name);

  /// Runs `body` with the given layers bound; the previous layer values are
  /// restored afterwards, also when `body` throws. Store writes made inside
  /// stay under the inner keys.
  template <class Body>
  void with(std::vector<Activation> activations, Body&& body) {
    enter_scope(std::move(activations));
    try {
      std::forward<Body>(body)();
    } catch (...) {
      exit_scope();
      throw;
    }
    exit_scope();
  }
  void enter_scope(std::vector<Activation> activations);
  void exit_scope();
  std::size_t scope_depth() const noexcept { return scopes_.size(); }

  /// Synchronization point: adopts the store from `handle` (re-parsed only
  /// if the file changed), drops unpersisted assignments, and re-evaluates
  /// every registered value in update order.
  void sync(StoreHandle& handle);
  /// Writes the working store through `handle` (merging with concurrent
  /// changes) and adopts the written result.
  void persist(StoreHandle& handle);

  /// Active layers only.
  std::map<std::string, std::string> active_layers() const;
  /// Value of `name`, empty if inactive.
  const std::string& layer(const std::string& name) const;
  const LayerMap& layers() const noexcept { return layers_; }

  void register_hook(std::string layer, Hook hook);

  const ConfigStore& store() const noexcept { return *store_; }
  /// Snapshot of the working store; later assignments do not affect it.
  StorePtr store_snapshot();

  /// Registered values in update order.
  const std::vector<ContextualValue*>& values() const noexcept { return ordered_; }
  const std::vector<std::string>& order_warnings() const noexcept { return warnings_; }
  ContextualValue* find_provider(const std::string& layer) const;

  /// Number of evaluate() calls made so far.
  std::uint64_t evaluation_count() const noexcept { return evaluations_; }

 private:
  class Pending;

  void rebuild_order();
  void reevaluate(ContextualValue& cv);
  void refresh_all();
  bool set_layer(const std::string& name, std::string value, Pending* pending);
  void propagate(Pending& pending);
  bool pinned(const std::string& layer) const { return pins_.find(layer) != pins_.end(); }
  ConfigStore& writable_store();
  void fire_hooks(const std::string& layer, const std::string& old_value, const std::string& new_value);

  struct Scope {
    std::vector<std::pair<std::string, std::string>> saved;
  };

  Options options_;
  StorePtr store_;
  std::shared_ptr<ConfigStore> own_store_;
  LayerMap layers_;
  std::unordered_map<std::string, ContextualValue*> observers_;
  std::vector<ContextualValue*> ordered_;
  std::unordered_map<std::string, std::vector<ContextualValue*>> consumers_;
  std::unordered_map<std::string, std::vector<Hook>> hooks_;
  std::unordered_map<std::string, int> pins_;
  std::vector<Scope> scopes_;
  std::vector<std::string> warnings_;
  std::uint64_t epoch_ = 0;
  std::uint64_t evaluations_ = 0;
  // Queue storage reused by propagations that do not overlap.
  std::vector<ContextualValue*> spare_queue_;
};

}  // namespace cv
