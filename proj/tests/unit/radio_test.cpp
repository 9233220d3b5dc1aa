#include <doctest.h>

#include <memory>
#include <optional>
#include <random>
#include <vector>

#include "lorasim/errors.hpp"
#include "lorasim/phy/phy_layer.hpp"
#include "lorasim/phy/radio.hpp"
#include "lorasim/sim/kernel.hpp"
#include "oracles.hpp"

using namespace lorasim::phy;
using lorasim::sim::Kernel;
using lorasim::sim::Task;

namespace {

Task<> send_at(Kernel& k, Radio& r, double at, std::vector<std::uint8_t> payload) {
  co_await k.sleep_until(k.at_seconds(at));
  co_await r.transmit(std::move(payload));
}

Task<> listen_at(Kernel& k, Radio& r, double at) {
  co_await k.sleep_until(k.at_seconds(at));
  r.listen();
}

Task<> receive_at(Kernel& k, Radio& r, double at, std::optional<double> timeout, std::optional<Reception>* out,
                  double* returned_at) {
  co_await k.sleep_until(k.at_seconds(at));
  *out = co_await r.receive(timeout);
  *returned_at = k.now_seconds();
}

std::vector<std::uint8_t> bytes(std::size_t n) { return std::vector<std::uint8_t>(n, 0xab); }

const ReceptionRecord* row_for(const Radio& r, std::uint64_t seq) {
  for (const auto& row : r.packets_log()) {
    if (row.packet_seq == seq) return &row;
  }
  return nullptr;
}

}  // namespace

TEST_CASE("a listening matched radio receives a packet at its end") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio rx(phy, "rx", {100, 0, 0});
  std::optional<Reception> got;
  double when = -1;
  k.create_task(receive_at(k, rx, 0.0, 5.0, &got, &when));
  k.create_task(send_at(k, tx, 1.0, bytes(20)));
  k.run(10);
  REQUIRE(got.has_value());
  CHECK(got->packet.payload == bytes(20));
  CHECK(got->rssi_dbm == doctest::Approx(-121.687).epsilon(1e-4));
  CHECK(when == doctest::Approx(1.056576).epsilon(1e-9));
  CHECK(rx.state() == RadioState::standby);
  const auto* row = row_for(rx, 0);
  REQUIRE(row != nullptr);
  CHECK(row->delivered);
  CHECK_FALSE(row->collided);
  CHECK_FALSE(row->preamble_missed);
  CHECK_FALSE(row->interrupted);
  CHECK(row->time.ticks == 1'000'000);
}

TEST_CASE("configuration mismatch is logged without flags") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio rx(phy, "rx", {100, 0, 0});
  RadioConfig c;
  c.sf = 9;
  rx.configure(c);
  rx.listen();
  k.create_task(send_at(k, tx, 0.0, bytes(5)));
  k.run(2);
  CHECK(rx.rx_queue().empty());
  const auto* row = row_for(rx, 0);
  REQUIRE(row != nullptr);
  CHECK_FALSE(row->delivered);
  CHECK_FALSE(row->collided);
  CHECK_FALSE(row->preamble_missed);
  CHECK_FALSE(row->interrupted);
}

TEST_CASE("inverted IQ only talks to inverted IQ") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio normal(phy, "normal", {50, 0, 0});
  Radio inverted(phy, "inv", {50, 0, 0});
  RadioConfig c;
  c.iq_inverted = true;
  tx.configure(c);
  inverted.configure(c);
  normal.listen();
  inverted.listen();
  k.create_task(send_at(k, tx, 0.0, bytes(5)));
  k.run(2);
  CHECK(normal.rx_queue().empty());
  CHECK(inverted.rx_queue().size() == 1);
}

TEST_CASE("starting to listen after the critical preamble section misses the packet") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio early(phy, "early", {100, 0, 0});
  Radio late(phy, "late", {100, 0, 0});
  Radio asleep(phy, "asleep", {100, 0, 0});
  // preamble ends at 12.544 ms; the critical section starts at 7.424 ms
  k.create_task(listen_at(k, early, 0.007));
  k.create_task(listen_at(k, late, 0.008));
  k.create_task(send_at(k, tx, 0.0, bytes(20)));
  k.run(2);
  CHECK(early.rx_queue().size() == 1);
  CHECK(late.rx_queue().empty());
  CHECK(row_for(late, 0)->preamble_missed);
  CHECK_FALSE(row_for(late, 0)->collided);
  CHECK(row_for(asleep, 0)->preamble_missed);
}

TEST_CASE("packets below sensitivity are dropped without flags") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio rx(phy, "rx", {5'000, 0, 0});
  rx.listen();
  k.create_task(send_at(k, tx, 0.0, bytes(5)));
  k.run(2);
  const auto* row = row_for(rx, 0);
  REQUIRE(row != nullptr);
  CHECK(row->rssi_dbm < -123.0);
  CHECK_FALSE(row->delivered);
  CHECK_FALSE(row->collided);
  CHECK_FALSE(row->preamble_missed);
  CHECK_FALSE(row->interrupted);
}

TEST_CASE("capture at the receiver: the stronger of two simultaneous packets survives") {
  Kernel k;
  PhyLayer phy(k);
  Radio near(phy, "near", {40, 0, 0});
  Radio far(phy, "far", {80, 0, 0});
  Radio gw(phy, "gw", {0, 0, 0});
  gw.listen();
  k.create_task(send_at(k, near, 0.0, bytes(10)));
  k.create_task(send_at(k, far, 0.0, bytes(10)));
  k.run(2);
  REQUIRE(gw.rx_queue().size() == 1);
  CHECK(gw.rx_queue().try_get()->packet.sender_id == "near");
  const auto* lost = row_for(gw, 1);
  REQUIRE(lost != nullptr);
  CHECK(lost->collided);
  CHECK(lost->preamble_missed);
}

TEST_CASE("a late interferer corrupts the payload of a locked packet") {
  Kernel k;
  PhyLayer phy(k);
  Radio a(phy, "a", {100, 0, 0});
  Radio b(phy, "b", {-100, 0, 0});
  Radio gw(phy, "gw", {0, 0, 0});
  gw.listen();
  k.create_task(send_at(k, a, 0.0, bytes(20)));
  k.create_task(send_at(k, b, 0.030, bytes(20)));
  k.run(2);
  CHECK(gw.rx_queue().empty());
  const auto* first = row_for(gw, 0);
  CHECK(first->collided);
  CHECK(first->interrupted);
  CHECK_FALSE(first->preamble_missed);
}

TEST_CASE("gateways in multi-sf mode receive every spreading factor at once") {
  Kernel k;
  PhyLayer phy(k);
  Radio a(phy, "a", {100, 0, 0});
  Radio b(phy, "b", {-100, 0, 0});
  Radio gw(phy, "gw", {0, 0, 0});
  gw.set_multi_sf(true);
  RadioConfig c;
  c.sf = 9;
  b.configure(c);
  gw.listen();
  k.create_task(send_at(k, a, 0.0, bytes(10)));
  k.create_task(send_at(k, b, 0.0, bytes(10)));
  k.run(2);
  CHECK(gw.rx_queue().size() == 2);
}

TEST_CASE("half-duplex: a transmitting radio hears nothing and interrupts its own reception") {
  Kernel k;
  PhyLayer phy(k);
  Radio a(phy, "a", {0, 0, 0});
  Radio b(phy, "b", {100, 0, 0});
  b.listen();
  k.create_task(send_at(k, a, 0.0, bytes(20)));
  // b locks onto a's packet at 12.544 ms, then transmits at 20 ms
  k.create_task(send_at(k, b, 0.020, bytes(20)));
  k.run(2);
  CHECK(b.rx_queue().empty());
  const auto* row = row_for(b, 0);
  CHECK(row->interrupted);
  CHECK_FALSE(row->collided);
  CHECK_FALSE(row->delivered);
  // and a, in standby after its own transmission, did not hear b
  CHECK(row_for(a, 1)->preamble_missed);
}

TEST_CASE("a transmitter never logs its own packet") {
  Kernel k;
  PhyLayer phy(k);
  Radio a(phy, "a", {0, 0, 0});
  Radio b(phy, "b", {100, 0, 0});
  k.create_task(send_at(k, a, 0.0, bytes(4)));
  k.run(1);
  CHECK(a.packets_log().empty());
  CHECK(b.packets_log().size() == 1);
}

TEST_CASE("transmit while already transmitting is a state error") {
  Kernel k;
  PhyLayer phy(k);
  Radio a(phy, "a", {0, 0, 0});
  k.create_task(send_at(k, a, 0.0, bytes(4)));
  k.create_task(send_at(k, a, 0.001, bytes(4)));
  CHECK_THROWS_AS(k.run(1), lorasim::StateError);
}

TEST_CASE("receive times out with nothing on air") {
  Kernel k;
  PhyLayer phy(k);
  Radio rx(phy, "rx", {0, 0, 0});
  std::optional<Reception> got;
  double when = -1;
  k.create_task(receive_at(k, rx, 2.0, 1.0, &got, &when));
  k.run(10);
  CHECK_FALSE(got.has_value());
  CHECK(when == doctest::Approx(3.0));
  CHECK(rx.state() == RadioState::standby);
}

TEST_CASE("receive returns at the end of a packet that locked before the deadline") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio rx(phy, "rx", {100, 0, 0});
  std::optional<Reception> got;
  double when = -1;
  // timeout at 20 ms, preamble locks at 12.544 ms, packet ends at 56.576 ms
  k.create_task(receive_at(k, rx, 0.0, 0.020, &got, &when));
  k.create_task(send_at(k, tx, 0.0, bytes(20)));
  k.run(1);
  REQUIRE(got.has_value());
  CHECK(when == doctest::Approx(0.056576).epsilon(1e-9));
}

TEST_CASE("continuous reception queues packets in arrival order") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio rx(phy, "rx", {100, 0, 0});
  rx.listen();
  k.create_task(send_at(k, tx, 0.0, {1}));
  k.create_task(send_at(k, tx, 1.0, {2}));
  k.create_task(send_at(k, tx, 2.0, {3}));
  k.run(5);
  REQUIRE(rx.rx_queue().size() == 3);
  CHECK(rx.rx_queue().try_get()->packet.payload[0] == 1);
  CHECK(rx.rx_queue().try_get()->packet.payload[0] == 2);
  CHECK(rx.rx_queue().try_get()->packet.payload[0] == 3);
  CHECK(rx.state() == RadioState::rx);
}

namespace {

Task<> cad_at(Kernel& k, Radio& r, double at, int* result) {
  co_await k.sleep_until(k.at_seconds(at));
  *result = (co_await r.cad()) ? 1 : 0;
}

}  // namespace

TEST_CASE("channel activity detection") {
  Kernel k;
  PhyLayer phy(k);
  Radio tx(phy, "tx", {0, 0, 0});
  Radio same(phy, "same", {100, 0, 0});
  Radio other_sf(phy, "other", {100, 0, 0});
  Radio quiet(phy, "quiet", {100, 0, 0});
  RadioConfig c;
  c.sf = 8;
  other_sf.configure(c);
  int r_same = -1;
  int r_other = -1;
  int r_quiet = -1;
  k.create_task(send_at(k, tx, 0.0, bytes(20)));
  k.create_task(cad_at(k, same, 0.030, &r_same));
  k.create_task(cad_at(k, other_sf, 0.030, &r_other));
  k.create_task(cad_at(k, quiet, 0.5, &r_quiet));
  k.run(1);
  CHECK(r_same == 1);
  CHECK(r_other == 0);
  CHECK(r_quiet == 0);
  CHECK(same.state() == RadioState::standby);
}

TEST_CASE("energy: one sf7 transmission of 20 bytes at 0.12 W") {
  Kernel k;
  PhyLayer phy(k);
  lorasim::energy::PowerProfile p;
  p.standby_w = 0.0;
  Radio tx(phy, "tx", {0, 0, 0}, p);
  k.create_task(send_at(k, tx, 1.0, bytes(20)));
  double total = -1;
  k.on_sim_end([&] { total = tx.power().total_energy(); });
  k.run(5);
  CHECK(std::abs(total - 6.78912e-3) <= 1e-6 * 0.12);
}

TEST_CASE("property: every radio logs exactly one row per packet it did not send") {
  std::mt19937_64 gen(7);
  for (int round = 0; round < 10; ++round) {
    Kernel k;
    PhyLayer phy(k);
    std::vector<std::unique_ptr<Radio>> radios;
    const int n = std::uniform_int_distribution<int>(2, 8)(gen);
    for (int i = 0; i < n; ++i) {
      radios.push_back(std::make_unique<Radio>(phy, "r" + std::to_string(i),
                                               Location{std::uniform_real_distribution<double>(0, 2000)(gen), 0, 0}));
      if (i % 2 == 0) radios.back()->listen();
    }
    std::vector<int> sent(n, 0);
    for (int i = 0; i < n; ++i) {
      if (i % 2 == 0) continue;
      for (int j = 0; j < 5; ++j) {
        k.create_task(send_at(k, *radios[i], j * 2.0 + std::uniform_real_distribution<double>(0, 1)(gen), bytes(8)));
        ++sent[i];
      }
    }
    k.run(20);
    int total = 0;
    for (int s : sent) total += s;
    CHECK(phy.packets_log().size() == static_cast<std::size_t>(total));
    for (int i = 0; i < n; ++i) {
      CHECK(radios[i]->packets_log().size() == static_cast<std::size_t>(total - sent[i]));
    }
  }
}

TEST_CASE("property: receiver delivery agrees with the slot-walking oracle") {
  std::mt19937_64 gen(11);
  for (int round = 0; round < 300; ++round) {
    Kernel k;
    PhyLayer phy(k);
    Radio gw(phy, "gw", {0, 0, 0});
    gw.set_multi_sf(true);
    gw.listen();
    std::vector<std::unique_ptr<Radio>> senders;
    const int n = std::uniform_int_distribution<int>(1, 5)(gen);
    for (int i = 0; i < n; ++i) {
      const double d = std::uniform_real_distribution<double>(40, 600)(gen);
      senders.push_back(std::make_unique<Radio>(phy, "s" + std::to_string(i), Location{d, 0, 0}));
      RadioConfig c;
      c.sf = std::uniform_int_distribution<int>(7, 8)(gen);
      senders.back()->configure(c);
      const auto start = std::uniform_int_distribution<int>(0, 150'000)(gen);
      k.create_task(send_at(k, *senders.back(), start * 1e-6,
                            bytes(static_cast<std::size_t>(std::uniform_int_distribution<int>(0, 30)(gen)))));
    }
    k.run(3);

    std::vector<Arrival> arrivals;
    for (const auto& p : phy.packets_log()) {
      const auto* row = row_for(gw, p.seq);
      REQUIRE(row != nullptr);
      const std::uint64_t sym = (1u << p.sf) * 8;
      const std::uint64_t pre = (4ULL * 8 + 17) * sym / 4;
      arrivals.push_back(Arrival{p.time, {p.time.ticks + pre},
                                 {p.time.ticks + static_cast<std::uint64_t>(std::llround(p.airtime_s * 1e6))},
                                 static_cast<double>(sym), row->rssi_dbm, p.frequency_hz, p.sf});
    }
    for (std::size_t i = 0; i < arrivals.size(); ++i) {
      std::vector<Arrival> others;
      for (std::size_t j = 0; j < arrivals.size(); ++j) {
        if (j != i) others.push_back(arrivals[j]);
      }
      const bool audible = arrivals[i].rssi_dbm >= CollisionParams{}.sensitivity(arrivals[i].sf, 125'000);
      const bool expect = audible && oracle::collision_by_slots(arrivals[i], others, 6.0, 5) ==
                                         CollisionOutcome::received;
      CHECK(row_for(gw, phy.packets_log()[i].seq)->delivered == expect);
    }
  }
}
