#include "lorasim/firmware/firmware.hpp"

#include <dlfcn.h>
#include <unistd.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <csetjmp>
#include <csignal>
#include <cstdlib>
#include <cstring>
#include <mutex>
#include <thread>

#include "lorasim/errors.hpp"
#include "lorasim/firmware/hal_abi.hpp"
#include "lorasim/log.hpp"
#include "spdlog/fmt/fmt.h"
#include "sim_hal.h"

namespace lorasim::firmware {

const char* to_string(FirmwareState s) {
  switch (s) {
    case FirmwareState::loaded:
      return "loaded";
    case FirmwareState::running:
      return "running";
    case FirmwareState::finished:
      return "finished";
    case FirmwareState::faulted:
      return "faulted";
  }
  return "?";
}

namespace {

// Thrown inside the firmware thread to unwind it from a HAL call after stop().
struct Unwind {};

enum class Turn { kernel, firmware };
enum class Event { none, call, finished, stopped, faulted, watchdog };

}  // namespace

// State shared between the kernel side and the firmware thread. The thread keeps its own
// reference so an abandoned (hung) thread never outlives what it touches.
struct FirmwareInstance::Context {
  std::string name;
  void* module = nullptr;
  int (*entry)() = nullptr;

  std::mutex m;
  std::condition_variable cv;
  Turn turn = Turn::kernel;
  Event event = Event::none;
  SIM_HalCall* pending = nullptr;
  bool stop_requested = false;
  bool exited = false;
  int exit_code = 0;
  std::string fault;
  std::thread thread;

  sigjmp_buf jmp;
  volatile sig_atomic_t jmp_armed = 0;
  volatile sig_atomic_t fault_signal = 0;
  void* fault_addr = nullptr;
  std::vector<char> alt_stack = std::vector<char>(std::max<std::size_t>(SIGSTKSZ, 64 * 1024));

  ~Context() {
    if (module) dlclose(module);
  }

  static std::int64_t dispatch_thunk(void* self, SIM_HalCall* call) {
    return static_cast<Context*>(self)->dispatch(call);
  }

  // Firmware thread: post the call, park until the kernel completes it.
  std::int64_t dispatch(SIM_HalCall* call) {
    std::unique_lock lk(m);
    if (stop_requested) throw Unwind{};
    pending = call;
    event = Event::call;
    turn = Turn::kernel;
    cv.notify_all();
    cv.wait(lk, [&] { return turn == Turn::firmware || stop_requested; });
    if (stop_requested) throw Unwind{};
    return call->result;
  }

  // Kernel side: let the firmware run until its next HAL call or exit.
  Event hand_over(double watchdog_s) {
    std::unique_lock lk(m);
    turn = Turn::firmware;
    event = Event::none;
    cv.notify_all();
    auto ready = [&] { return turn == Turn::kernel; };
    if (watchdog_s > 0) {
      if (!cv.wait_for(lk, std::chrono::duration<double>(watchdog_s), ready)) return Event::watchdog;
    } else {
      cv.wait(lk, ready);
    }
    return event;
  }

  void post(Event ev, int code) {
    std::lock_guard lk(m);
    event = ev;
    exit_code = code;
    exited = true;
    turn = Turn::kernel;
    cv.notify_all();
  }

  void shutdown() {
    bool busy = false;
    {
      std::lock_guard lk(m);
      stop_requested = true;
      busy = turn == Turn::firmware && !exited;
      cv.notify_all();
    }
    if (!thread.joinable() || thread.get_id() == std::this_thread::get_id()) return;
    if (busy) {
      // Still executing firmware code; it unwinds at its next HAL call, if any.
      thread.detach();
    } else {
      thread.join();
    }
  }
};

namespace {

thread_local FirmwareInstance::Context* t_context = nullptr;

constexpr std::array kFaultSignals{SIGSEGV, SIGBUS, SIGILL, SIGFPE};
struct sigaction g_previous[NSIG];

void on_fault(int sig, siginfo_t* info, void*) {
  auto* ctx = t_context;
  if (!ctx || !ctx->jmp_armed) {
    // Not ours: restore the previous disposition and let the instruction fault again.
    sigaction(sig, &g_previous[sig], nullptr);
    return;
  }
  ctx->fault_signal = sig;
  ctx->fault_addr = info ? info->si_addr : nullptr;
  ctx->jmp_armed = 0;
  siglongjmp(ctx->jmp, 1);
}

// Re-armed at every start: host frameworks (test runners, Python's faulthandler) install
// their own handlers, which are kept as the fallback for faults outside firmware threads.
void install_fault_handlers() {
  for (int sig : kFaultSignals) {
    struct sigaction current {};
    sigaction(sig, nullptr, &current);
    if ((current.sa_flags & SA_SIGINFO) && current.sa_sigaction == on_fault) continue;
    struct sigaction sa {};
    sa.sa_sigaction = on_fault;
    sa.sa_flags = SA_SIGINFO | SA_ONSTACK | SA_NODEFER;
    sigemptyset(&sa.sa_mask);
    sigaction(sig, &sa, &g_previous[sig]);
  }
}

// The HAL entry points must be in global symbol scope for the module's imports to bind, even
// when this code itself was loaded with RTLD_LOCAL (as in a Python extension).
void promote_hal_library() {
  static std::once_flag once;
  std::call_once(once, [] {
    Dl_info info{};
    if (dladdr(reinterpret_cast<void*>(&HAL_GetTick), &info) && info.dli_fname) {
      dlopen(info.dli_fname, RTLD_NOW | RTLD_GLOBAL | RTLD_NOLOAD);
    }
  });
}

bool is_hal_name(const std::string& s) { return s.starts_with("HAL_") || s.starts_with("SIM_"); }

std::string signal_name(int sig) {
  switch (sig) {
    case SIGSEGV:
      return "SIGSEGV";
    case SIGBUS:
      return "SIGBUS";
    case SIGILL:
      return "SIGILL";
    case SIGFPE:
      return "SIGFPE";
  }
  return "signal " + std::to_string(sig);
}

// sigsetjmp must live in a frame that stays active while the firmware runs.
Event run_entry(FirmwareInstance::Context& ctx, int& code) {
  if (sigsetjmp(ctx.jmp, 1) != 0) return Event::faulted;
  ctx.jmp_armed = 1;
  try {
    code = ctx.entry();
  } catch (const Unwind&) {
    ctx.jmp_armed = 0;
    return Event::stopped;
  } catch (const std::exception& e) {
    ctx.jmp_armed = 0;
    ctx.fault = std::string("firmware raised an exception: ") + e.what();
    return Event::faulted;
  } catch (...) {
    ctx.jmp_armed = 0;
    ctx.fault = "firmware raised an exception";
    return Event::faulted;
  }
  ctx.jmp_armed = 0;
  return Event::finished;
}

void thread_main(std::shared_ptr<FirmwareInstance::Context> ctx) {
  t_context = ctx.get();
  lorasim_hal_bind_thread(ctx.get(), &FirmwareInstance::Context::dispatch_thunk);
  stack_t ss{};
  ss.ss_sp = ctx->alt_stack.data();
  ss.ss_size = ctx->alt_stack.size();
  sigaltstack(&ss, nullptr);

  bool go = false;
  {
    std::unique_lock lk(ctx->m);
    ctx->cv.wait(lk, [&] { return ctx->turn == Turn::firmware || ctx->stop_requested; });
    go = !ctx->stop_requested;
  }
  int code = 0;
  Event ev = go ? run_entry(*ctx, code) : Event::stopped;
  if (ev == Event::faulted && ctx->fault.empty()) {
    const int sig = ctx->fault_signal;
    ctx->fault = std::string("firmware trapped with ") + signal_name(sig);
    if (sig == SIGSEGV || sig == SIGBUS) {
      char addr[32];
      std::snprintf(addr, sizeof addr, "%p", ctx->fault_addr);
      ctx->fault += std::string(" at address ") + addr;
    }
  }

  stack_t off{};
  off.ss_flags = SS_DISABLE;
  sigaltstack(&off, nullptr);
  lorasim_hal_bind_thread(nullptr, nullptr);
  t_context = nullptr;
  ctx->post(ev, code);
}

double delay_seconds(const SIM_HalCall& c) { return static_cast<double>(static_cast<std::uint32_t>(c.args[0])) / 1000.0; }

sim::Task<std::int64_t> hal_delay(FirmwareInstance& fw, SIM_HalCall& c) {
  co_await fw.kernel().sleep(delay_seconds(c));
  co_return 0;
}

sim::Task<std::int64_t> hal_get_tick(FirmwareInstance& fw, SIM_HalCall&) {
  auto& k = fw.kernel();
  // 1 ns guard against binary rounding of tick * tick_duration
  const double ms = std::floor(k.now_seconds() * 1000.0 + 1e-6);
  co_return static_cast<std::int64_t>(static_cast<std::uint32_t>(static_cast<std::uint64_t>(ms)));
}

sim::Task<std::int64_t> radio_configure(FirmwareInstance& fw, SIM_HalCall& c) {
  if (!c.in || c.in_len != static_cast<std::int32_t>(sizeof(SIM_RadioConfig))) co_return -1;
  SIM_RadioConfig in;
  std::memcpy(&in, c.in, sizeof in);
  phy::RadioConfig cfg;
  cfg.frequency_hz = in.frequency_hz;
  cfg.bw_hz = in.bandwidth_hz;
  cfg.sf = in.spreading_factor;
  cfg.cr = in.coding_rate;
  cfg.preamble_symbols = in.preamble_symbols;
  cfg.tx_power_dbm = in.tx_power_dbm;
  cfg.iq_inverted = in.iq_inverted != 0;
  cfg.crc_on = in.crc_on != 0;
  cfg.explicit_header = in.explicit_header != 0;
  try {
    cfg.validate();
    fw.radio().configure(cfg.normalized());
  } catch (const ArgumentError& e) {
    log::get("firmware")->warn("{}: SIM_RadioConfigure rejected: {}", fw.name(), e.what());
    co_return -1;
  }
  co_return 0;
}

sim::Task<std::int64_t> radio_transmit(FirmwareInstance& fw, SIM_HalCall& c) {
  if (c.in_len < 0 || c.in_len > 255 || (c.in_len > 0 && !c.in)) co_return -1;
  const auto* p = static_cast<const std::uint8_t*>(c.in);
  std::vector<std::uint8_t> payload(p, p + c.in_len);
  try {
    co_await fw.radio().transmit(std::move(payload));
  } catch (const StateError& e) {
    log::get("firmware")->warn("{}: SIM_RadioTransmit failed: {}", fw.name(), e.what());
    co_return -1;
  }
  co_return 0;
}

sim::Task<std::int64_t> radio_receive(FirmwareInstance& fw, SIM_HalCall& c) {
  const auto maxlen = static_cast<std::int32_t>(c.args[0]);
  if (maxlen < 0 || (maxlen > 0 && !c.out)) co_return -1;
  const double timeout = static_cast<double>(static_cast<std::uint32_t>(c.args[1])) / 1000.0;
  std::optional<phy::Reception> rx;
  try {
    rx = co_await fw.radio().receive(timeout);
  } catch (const StateError& e) {
    log::get("firmware")->warn("{}: SIM_RadioReceive failed: {}", fw.name(), e.what());
    co_return -1;
  }
  if (!rx) co_return -1;
  const auto& bytes = rx->packet.payload;
  const auto n = static_cast<std::int32_t>(std::min<std::size_t>(bytes.size(), static_cast<std::size_t>(maxlen)));
  if (static_cast<std::size_t>(n) < bytes.size()) {
    log::get("firmware")->warn("{}: received {} bytes into a {} byte buffer; truncated", fw.name(), bytes.size(),
                               maxlen);
  }
  if (n > 0) std::memcpy(c.out, bytes.data(), static_cast<std::size_t>(n));
  co_return n;
}

}  // namespace

HalBindingTable HalBindingTable::defaults() {
  HalBindingTable t;
  t.bind("HAL_Delay", hal_delay);
  t.bind("HAL_GetTick", hal_get_tick);
  t.bind("SIM_RadioConfigure", radio_configure);
  t.bind("SIM_RadioTransmit", radio_transmit);
  t.bind("SIM_RadioReceive", radio_receive);
  return t;
}

void HalBindingTable::bind(std::string name, HalHandler handler) {
  if (!handler) throw ArgumentError("empty HAL handler for " + name);
  handlers_[std::move(name)] = std::move(handler);
}

const HalHandler* HalBindingTable::find(std::string_view name) const {
  auto it = handlers_.find(name);
  return it == handlers_.end() ? nullptr : &it->second;
}

std::vector<std::string> HalBindingTable::names() const {
  std::vector<std::string> out;
  for (const auto& [n, h] : handlers_) out.push_back(n);
  return out;
}

std::unique_ptr<FirmwareInstance> load_firmware(sim::Kernel& kernel, const FirmwareImage& image,
                                                FirmwareOptions options) {
  namespace fs = std::filesystem;
  if (!fs::is_regular_file(image.path)) {
    throw FirmwareLoadError("firmware module " + image.path.string() + " does not exist");
  }
  if (!(options.watchdog_s >= 0)) throw ArgumentError("watchdog_s must be >= 0");
  const ModuleSymbols syms = read_dynamic_symbols(image.path);
  if (std::find(syms.exports.begin(), syms.exports.end(), image.entry_symbol) == syms.exports.end()) {
    throw FirmwareLoadError(image.path.string() + " does not export the entry point " + image.entry_symbol,
                            image.entry_symbol);
  }

  promote_hal_library();
  for (const auto& name : syms.imports) {
    const bool resolvable = dlsym(RTLD_DEFAULT, name.c_str()) != nullptr;
    if (options.bindings.contains(name)) {
      if (!resolvable) {
        throw FirmwareLoadError("HAL call " + name + " has a handler but no exported entry point; provide a C shim " +
                                    "named " + name + " that forwards through SIM_HalDispatch",
                                name);
      }
      continue;
    }
    if (name == "SIM_HalDispatch" && resolvable) continue;
    if (is_hal_name(name)) {
      throw FirmwareLoadError("firmware imports " + name + " but no shim is bound for it; provide a shim for this " +
                                  "peripheral (a C function " + name + " forwarding through SIM_HalDispatch) and " +
                                  "bind a handler under that name",
                              name);
    }
    if (!resolvable) {
      throw FirmwareLoadError("firmware import " + name + " cannot be resolved in this process", name);
    }
  }

  // A private copy gives every instance its own firmware globals.
  std::string tmpl = (fs::temp_directory_path() / "lorasim-fw-XXXXXX.so").string();
  const int fd = mkstemps(tmpl.data(), 3);
  if (fd < 0) throw FirmwareLoadError("cannot create a temporary copy of " + image.path.string());
  close(fd);
  std::error_code ec;
  fs::copy_file(image.path, tmpl, fs::copy_options::overwrite_existing, ec);
  void* module = ec ? nullptr : dlopen(tmpl.c_str(), RTLD_NOW | RTLD_LOCAL);
  const std::string dl_error = module ? "" : (ec ? ec.message() : std::string(dlerror()));
  fs::remove(tmpl, ec);
  if (!module) throw FirmwareLoadError("cannot load " + image.path.string() + ": " + dl_error);

  auto ctx = std::make_shared<FirmwareInstance::Context>();
  ctx->module = module;
  ctx->entry = reinterpret_cast<int (*)()>(dlsym(module, image.entry_symbol.c_str()));
  if (!ctx->entry) {
    throw FirmwareLoadError(image.path.string() + " does not export the entry point " + image.entry_symbol,
                            image.entry_symbol);
  }
  return std::unique_ptr<FirmwareInstance>(
      new FirmwareInstance(kernel, image, std::move(options), std::move(ctx)));
}

FirmwareInstance::FirmwareInstance(sim::Kernel& kernel, FirmwareImage image, FirmwareOptions options,
                                   std::shared_ptr<Context> ctx)
    : kernel_(&kernel), image_(std::move(image)), options_(std::move(options)), ctx_(std::move(ctx)) {
  name_ = options_.name.empty() ? image_.path.filename().string() : options_.name;
  ctx_->name = name_;
}

FirmwareInstance::~FirmwareInstance() {
  if (task_.valid() && !task_.done()) {
    // Destroying the mirror frame also releases the firmware thread.
    task_.cancel();
  }
  ctx_->shutdown();
}

phy::Radio& FirmwareInstance::radio() {
  if (!radio_) throw StateError("firmware " + name_ + " has no radio until started");
  return *radio_;
}

void FirmwareInstance::start(phy::Radio& radio) {
  if (state_ != FirmwareState::loaded || stopped_) {
    throw StateError("firmware " + name_ + " cannot start: it is " + (stopped_ ? "stopped" : to_string(state_)));
  }
  radio_ = &radio;
  state_ = FirmwareState::running;
  install_fault_handlers();
  ctx_->thread = std::thread(thread_main, ctx_);
  task_ = kernel_->start_child_task(mirror(), "firmware " + name_);
}

void FirmwareInstance::stop() {
  if (stopped_) return;
  stopped_ = true;
  if (task_.valid() && !task_.done()) task_.cancel();
  ctx_->shutdown();
  if (state_ == FirmwareState::running) state_ = FirmwareState::finished;
}

sim::Task<> FirmwareInstance::mirror() {
  // Releases the firmware thread however this frame ends: return, fault or cancellation.
  struct Release {
    FirmwareInstance* fw;
    ~Release() {
      fw->ctx_->shutdown();
      if (fw->state_ == FirmwareState::running) fw->state_ = FirmwareState::finished;
    }
  } release{this};
  auto logger = log::get("firmware");

  for (;;) {
    Event ev;
    {
      // The firmware is executing: virtual time must not move.
      auto lock = kernel_->hold_timer_lock();
      ev = ctx_->hand_over(options_.watchdog_s);
    }
    switch (ev) {
      case Event::finished:
        state_ = FirmwareState::finished;
        exit_code_ = ctx_->exit_code;
        logger->info("{} returned {} at {:.9g} s", name_, *exit_code_, kernel_->now_seconds());
        co_return;
      case Event::stopped:
        state_ = FirmwareState::finished;
        co_return;
      case Event::watchdog:
        state_ = FirmwareState::faulted;
        diagnostic_ = fmt::format(
            "firmware {} ran for more than {} s of wall time without a HAL call; virtual time is frozen at {:.9g} s",
            name_, options_.watchdog_s, kernel_->now_seconds());
        logger->error("{}", diagnostic_);
        throw FirmwareFault(diagnostic_);
      case Event::faulted:
        state_ = FirmwareState::faulted;
        diagnostic_ = fmt::format("firmware {}: {} at virtual time {:.9g} s", name_, ctx_->fault, kernel_->now_seconds());
        logger->error("{}", diagnostic_);
        throw FirmwareFault(diagnostic_);
      case Event::call:
      case Event::none:
        break;
    }

    SIM_HalCall& call = *ctx_->pending;
    HalTraceEntry entry{call.name ? call.name : "", kernel_->now(), {}, -1};
    if (const HalHandler* h = options_.bindings.find(entry.call)) {
      entry.result = co_await (*h)(*this, call);
    } else {
      logger->error("{}: no handler bound for {}", name_, entry.call);
    }
    call.result = entry.result;
    entry.completed = kernel_->now();
    trace_.push_back(std::move(entry));
  }
}

}  // namespace lorasim::firmware
