// SPDX-License-Identifier: Apache-2.0

#include "cv/context.hpp"

#include <algorithm>

#include "cv/error.hpp"

namespace cv {

ContextualValue::ContextualValue(CVSpec spec) : spec_(std::move(spec)), cache_(from_text(spec_.type, spec_.default_value)) {}

ContextualValue::ContextualValue(Context& ctx, CVSpec spec) : ContextualValue(std::move(spec)) { ctx.add(*this); }

ContextualValue::~ContextualValue() {
  if (ctx_ != nullptr) ctx_->remove(*this);
}

/// CVs waiting for re-evaluation in the current propagation. Clears the
/// queued marks if propagation is abandoned by an exception.
class Context::Pending {
 public:
  explicit Pending(Context& ctx) : spare_(ctx.spare_queue_) { items_.swap(spare_); }

  ~Pending() {
    for (auto* cv : items_) cv->queued_ = false;
    items_.clear();
    if (items_.capacity() > spare_.capacity()) items_.swap(spare_);
  }

  void push(ContextualValue* cv) {
    if (cv->queued_) return;
    cv->queued_ = true;
    items_.push_back(cv);
  }

  bool empty() const noexcept { return items_.empty(); }

  ContextualValue* pop_first() {
    const auto it = std::min_element(items_.begin(), items_.end(),
                                     [](const ContextualValue* a, const ContextualValue* b) { return a->rank_ < b->rank_; });
    ContextualValue* cv = *it;
    items_.erase(it);
    cv->queued_ = false;
    return cv;
  }

 private:
  std::vector<ContextualValue*>& spare_;
  std::vector<ContextualValue*> items_;
};

Context::Context() : Context(std::make_shared<const ConfigStore>()) {}

Context::Context(StorePtr store) : Context(std::move(store), Options{}) {}

Context::Context(StorePtr store, Options options) : options_(options), store_(std::move(store)) {
  if (!store_) store_ = std::make_shared<const ConfigStore>();
}

Context::~Context() {
  for (auto* cv : ordered_) {
    cv->ctx_ = nullptr;
    cv->activated_ = false;
  }
}

void Context::add(ContextualValue& cv) {
  if (cv.ctx_ == this) return;
  if (cv.ctx_ != nullptr) throw Error("contextual value [" + cv.spec_.key.str() + "] belongs to another context");
  if (const auto it = observers_.find(cv.layer_name()); it != observers_.end()) {
    throw Error("layer '" + cv.layer_name() + "' is already observed by [" + it->second->spec_.key.str() + "]");
  }
  observers_.emplace(cv.layer_name(), &cv);
  ordered_.push_back(&cv);
  try {
    rebuild_order();
  } catch (...) {
    observers_.erase(cv.layer_name());
    ordered_.erase(std::find(ordered_.begin(), ordered_.end(), &cv));
    rebuild_order();
    throw;
  }
  cv.ctx_ = this;
  reevaluate(cv);
}

void Context::remove(ContextualValue& cv) noexcept {
  if (cv.ctx_ != this) return;
  if (cv.activated_ && !pinned(cv.layer_name())) layers_[cv.layer_name()].clear();
  cv.activated_ = false;
  cv.ctx_ = nullptr;
  observers_.erase(cv.layer_name());
  ordered_.erase(std::find(ordered_.begin(), ordered_.end(), &cv));
  rebuild_order();
}

void Context::rebuild_order() {
  std::vector<CVSpec> specs;
  specs.reserve(ordered_.size());
  for (const auto* cv : ordered_) specs.push_back(cv->spec_);
  const DependencyGraph graph = build_dependency_graph(std::move(specs), !options_.check_cycles);
  std::vector<std::string> warnings;
  const auto order = topo_indices(graph, &warnings);

  std::vector<ContextualValue*> next;
  next.reserve(order.size());
  for (std::size_t i : order) next.push_back(ordered_[i]);
  ordered_ = std::move(next);
  warnings_ = std::move(warnings);

  consumers_.clear();
  for (std::size_t rank = 0; rank < ordered_.size(); ++rank) {
    ContextualValue* cv = ordered_[rank];
    cv->rank_ = rank;
    for (const auto& dep : cv->spec_.dependencies) consumers_[dep].push_back(cv);
  }
}

void Context::reevaluate(ContextualValue& cv) {
  ++evaluations_;
  Evaluation ev = evaluate(cv.spec_, layers_, *store_);
  cv.current_key_ = std::move(ev.key);
  cv.cache_ = std::move(ev.value);
}

void Context::fire_hooks(const std::string& layer, const std::string& old_value, const std::string& new_value) {
  const auto it = hooks_.find(layer);
  if (it == hooks_.end()) return;
  for (const auto& hook : it->second) hook(layer, old_value, new_value);
}

bool Context::set_layer(const std::string& name, std::string value, Pending* pending) {
  std::string& slot = layers_[name];
  if (slot == value) return false;
  std::string old = std::exchange(slot, std::move(value));
  if (const auto it = consumers_.find(name); it != consumers_.end()) {
    for (ContextualValue* consumer : it->second) {
      if (consumer->updated_epoch_ == epoch_) {
        throw PropagationCycleError("layer '" + name + "' changed after [" + consumer->spec_.key.str() +
                                    "] was already updated; the specification has a cycle");
      }
      if (pending != nullptr) pending->push(consumer);
    }
  }
  fire_hooks(name, old, layers_[name]);
  return true;
}

void Context::propagate(Pending& pending) {
  while (!pending.empty()) {
    ContextualValue* cv = pending.pop_first();
    if (cv->updated_epoch_ == epoch_) {
      throw PropagationCycleError("[" + cv->spec_.key.str() + "] revisited during one propagation");
    }
    cv->updated_epoch_ = epoch_;
    reevaluate(*cv);
    if (cv->activated_ && !pinned(cv->layer_name())) set_layer(cv->layer_name(), cv->text(), &pending);
  }
}

void Context::activate(ContextualValue& cv) {
  add(cv);
  if (cv.activated_) return;
  cv.activated_ = true;
  ++epoch_;
  cv.updated_epoch_ = epoch_;
  Pending pending(*this);
  if (!pinned(cv.layer_name())) set_layer(cv.layer_name(), cv.text(), &pending);
  propagate(pending);
}

void Context::deactivate(ContextualValue& cv) {
  if (cv.ctx_ != this || !cv.activated_) {
    throw Error("[" + cv.spec_.key.str() + "] is not activated");
  }
  cv.activated_ = false;
  ++epoch_;
  cv.updated_epoch_ = epoch_;
  Pending pending(*this);
  if (!pinned(cv.layer_name())) set_layer(cv.layer_name(), std::string(), &pending);
  propagate(pending);
}

ConfigStore& Context::writable_store() {
  if (!own_store_) {
    own_store_ = std::make_shared<ConfigStore>(*store_);
    store_ = own_store_;
  }
  return *own_store_;
}

void Context::assign(ContextualValue& cv, TypedValue value) {
  if (cv.ctx_ != this) throw Error("[" + cv.spec_.key.str() + "] is not registered with this context");
  if (type_of(value) != cv.spec_.type) {
    throw TypeError("[" + cv.spec_.key.str() + "] expects " + std::string(type_name(cv.spec_.type)) + ", got " +
                    std::string(type_name(type_of(value))));
  }
  std::string text = to_text(value);
  writable_store().set(cv.current_key_, text);
  cv.cache_ = std::move(value);

  ++epoch_;
  cv.updated_epoch_ = epoch_;
  Pending pending(*this);
  // Values whose keys overlap this one may read the entry just written.
  const KeyPath written = KeyPath::parse(cv.current_key_);
  for (ContextualValue* other : ordered_) {
    if (other != &cv && other->spec_.key.matches(written)) pending.push(other);
  }
  if (cv.activated_ && !pinned(cv.layer_name())) set_layer(cv.layer_name(), std::move(text), &pending);
  propagate(pending);
}

void Context::assign_text(ContextualValue& cv, std::string_view text) { assign(cv, from_text(cv.spec_.type, text)); }

void Context::activate_layer(const std::string& name, std::string value) {
  if (const auto* provider = find_provider(name); provider != nullptr && provider->activated_) {
    throw Error("layer '" + name + "' is provided by activated [" + provider->spec_.key.str() + "]");
  }
  ++epoch_;
  Pending pending(*this);
  set_layer(name, std::move(value), &pending);
  propagate(pending);
}

void Context::deactivate_layer(const std::string& name) { activate_layer(name, std::string()); }

void Context::enter_scope(std::vector<Activation> activations) {
  std::stable_sort(activations.begin(), activations.end(), [this](const Activation& a, const Activation& b) {
    const auto* pa = find_provider(a.layer);
    const auto* pb = find_provider(b.layer);
    const long ra = pa == nullptr ? -1 : static_cast<long>(pa->rank_);
    const long rb = pb == nullptr ? -1 : static_cast<long>(pb->rank_);
    return ra < rb;
  });
  Scope scope;
  for (const auto& act : activations) {
    scope.saved.emplace_back(act.layer, layer(act.layer));
    ++pins_[act.layer];
  }
  scopes_.push_back(std::move(scope));

  ++epoch_;
  Pending pending(*this);
  for (auto& act : activations) set_layer(act.layer, std::move(act.value), &pending);
  propagate(pending);
}

void Context::exit_scope() {
  if (scopes_.empty()) throw Error("exit_scope without matching enter_scope");
  Scope scope = std::move(scopes_.back());
  scopes_.pop_back();
  for (const auto& [name, value] : scope.saved) {
    if (--pins_[name] == 0) pins_.erase(name);
  }

  ++epoch_;
  Pending pending(*this);
  for (auto it = scope.saved.rbegin(); it != scope.saved.rend(); ++it) {
    const auto& [name, value] = *it;
    ContextualValue* provider = find_provider(name);
    if (!pinned(name) && provider != nullptr && provider->activated_) {
      // The provider re-derives its layer from the restored context.
      pending.push(provider);
    } else {
      set_layer(name, value, &pending);
    }
  }
  propagate(pending);
}

void Context::refresh_all() {
  ++epoch_;
  for (ContextualValue* cv : ordered_) {
    cv->updated_epoch_ = epoch_;
    reevaluate(*cv);
    if (cv->activated_ && !pinned(cv->layer_name())) set_layer(cv->layer_name(), cv->text(), nullptr);
  }
}

void Context::sync(StoreHandle& handle) {
  store_ = handle.get().store;
  own_store_.reset();
  refresh_all();
}

void Context::persist(StoreHandle& handle) {
  handle.set(*store_);
  store_ = handle.last_loaded();
  own_store_.reset();
  refresh_all();
}

std::map<std::string, std::string> Context::active_layers() const {
  std::map<std::string, std::string> out;
  for (const auto& [name, value] : layers_) {
    if (!value.empty()) out.emplace(name, value);
  }
  return out;
}

const std::string& Context::layer(const std::string& name) const {
  static const std::string empty;
  const auto it = layers_.find(name);
  return it == layers_.end() ? empty : it->second;
}

void Context::register_hook(std::string layer, Hook hook) { hooks_[std::move(layer)].push_back(std::move(hook)); }

StorePtr Context::store_snapshot() {
  own_store_.reset();
  return store_;
}

ContextualValue* Context::find_provider(const std::string& layer) const {
  const auto it = observers_.find(layer);
  return it == observers_.end() ? nullptr : it->second;
}

}  // namespace cv
