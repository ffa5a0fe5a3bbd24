#include <gtest/gtest.h>

#include <thread>

#include "httplib.h"
#include "mmdial/annotation_service.hpp"
#include "mmdial/error.hpp"
#include "support.hpp"

using namespace mmdial;
using testing_support::TempDir;

namespace {

std::vector<Instance> sample(std::size_t n) {
  std::vector<Instance> out;
  for (std::size_t i = 0; i < n; ++i) out.push_back(testing_support::instance("s" + std::to_string(i), 0.1 * i));
  return out;
}

std::string answer(const std::string& id, const std::string& who, int q1 = 2, int q2 = 2, int q3 = 3) {
  return io::Json{{"instance_id", id}, {"annotator_id", who}, {"q1", q1}, {"q2", q2}, {"q3", q3}}.dump();
}

// Runs an AnnotationServer on a free port for the lifetime of the object.
class Running {
 public:
  Running(AnnotationSession& session, ServerOptions options = {}) : server_(session, with_any_port(options)) {
    port_ = server_.bind();
    thread_ = std::thread([this] { server_.listen(); });
  }
  ~Running() {
    server_.stop();
    thread_.join();
  }
  httplib::Client client() const {
    httplib::Client c("127.0.0.1", port_);
    c.set_connection_timeout(5);
    return c;
  }

 private:
  static ServerOptions with_any_port(ServerOptions o) {
    o.port = 0;
    return o;
  }
  AnnotationServer server_;
  int port_ = 0;
  std::thread thread_;
};

}  // namespace

TEST(Session, FreshAnnotatorGetsSampleOrder) {
  TempDir dir("svc");
  AnnotationSession session(sample(5), dir / "log.csv");
  auto batch = session.batch("ann", 3);
  ASSERT_EQ(batch.size(), 3u);
  EXPECT_EQ(batch[0]->instance_id, "s0");
  EXPECT_EQ(batch[2]->instance_id, "s2");
  EXPECT_EQ(session.progress("ann").answered, 0u);
  EXPECT_EQ(session.progress("ann").total, 5u);
}

TEST(Session, SubmitOutcomes) {
  TempDir dir("svc");
  AnnotationSession session(sample(3), dir / "log.csv");
  AnnotationRecord r{"s1", "ann", 2, 2, 4, 1};
  EXPECT_EQ(session.submit(r), AnnotationSession::Submit::kAccepted);
  EXPECT_EQ(session.submit(r), AnnotationSession::Submit::kDuplicate);
  r.annotator_id = "other";
  EXPECT_EQ(session.submit(r), AnnotationSession::Submit::kAccepted);
  r.instance_id = "nope";
  EXPECT_EQ(session.submit(r), AnnotationSession::Submit::kUnknownInstance);
  r.instance_id = "s0";
  r.q3 = 6;
  EXPECT_THROW(session.submit(r), RangeError);
  EXPECT_EQ(session.batch("ann", 10).front()->instance_id, "s0");
  EXPECT_EQ(load_annotations(dir / "log.csv").size(), 2u);
}

TEST(Session, RestartReplaysLog) {
  TempDir dir("svc");
  {
    AnnotationSession session(sample(4), dir / "log.csv");
    session.submit({"s0", "ann", 1, 1, 1, std::nullopt});
    session.submit({"s2", "ann", 3, 3, 5, 4});
  }
  AnnotationSession again(sample(4), dir / "log.csv");
  EXPECT_EQ(again.progress("ann").answered, 2u);
  auto batch = again.batch("ann", 10);
  ASSERT_EQ(batch.size(), 2u);
  EXPECT_EQ(batch[0]->instance_id, "s1");
  EXPECT_EQ(again.submit({"s0", "ann", 1, 1, 1, std::nullopt}), AnnotationSession::Submit::kDuplicate);
  auto lines = testing_support::read_text(dir / "log.csv");
  EXPECT_EQ(lines.rfind(std::string(kAnnotationHeader) + "\n", 0), 0u);
  EXPECT_EQ(testing_support::count_lines(dir / "log.csv"), 3u);
}

TEST(Http, BatchProgressAnswer) {
  TempDir dir("svc");
  AnnotationSession session(sample(4), dir / "log.csv");
  ServerOptions o;
  o.image_base = "/images/";
  Running server(session, o);
  auto c = server.client();

  auto res = c.Get("/api/batch?annotator=ann&limit=2");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  auto body = io::Json::parse(res->body);
  ASSERT_EQ(body["items"].size(), 2u);
  const auto& item = body["items"][0];
  EXPECT_EQ(item["instance_id"], "s0");
  EXPECT_EQ(item["image_ref"], "/images/img-s0");
  EXPECT_EQ(item["target"], "target s0");
  EXPECT_EQ(item["context"][0]["text"], "hello there");
  EXPECT_EQ(item["questions"]["q3"], "5-point");
  EXPECT_EQ(item["questions"]["q4"], "choice-4");

  res = c.Post("/api/answer", answer("s0", "ann"), "application/json");
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(io::Json::parse(res->body), (io::Json{{"accepted", true}}));

  res = c.Post("/api/answer", answer("s0", "ann"), "application/json");
  EXPECT_EQ(res->status, 409);
  EXPECT_TRUE(io::Json::parse(res->body).contains("error"));

  res = c.Post("/api/answer", answer("s1", "ann", 4, 2, 3), "application/json");
  EXPECT_EQ(res->status, 422);
  res = c.Post("/api/answer", answer("ghost", "ann"), "application/json");
  EXPECT_EQ(res->status, 404);
  res = c.Post("/api/answer", "{not json", "application/json");
  EXPECT_EQ(res->status, 400);
  res = c.Post("/api/answer", R"({"instance_id": "s1", "annotator_id": "ann", "q1": "2", "q2": 2, "q3": 3})",
               "application/json");
  EXPECT_EQ(res->status, 400);
  res = c.Get("/api/batch");
  EXPECT_EQ(res->status, 400);

  res = c.Get("/api/progress?annotator=ann");
  ASSERT_TRUE(res);
  EXPECT_EQ(io::Json::parse(res->body), (io::Json{{"answered", 1}, {"total", 4}}));
  res = c.Get("/api/batch?annotator=ann&limit=10");
  EXPECT_EQ(io::Json::parse(res->body)["items"][0]["instance_id"], "s1");
}

TEST(Http, ConcurrentClientsAndStaticUi) {
  TempDir dir("svc");
  std::filesystem::create_directories(dir / "ui");
  testing_support::write_text(dir / "ui" / "index.html", "<html>annotate</html>");
  AnnotationSession session(sample(30), dir / "log.csv");
  ServerOptions o;
  o.ui_dir = dir / "ui";
  {
    Running server(session, o);
    std::vector<std::thread> clients;
    std::atomic<int> ok{0};
    for (int a = 0; a < 3; ++a) {
      clients.emplace_back([&, a] {
        auto c = server.client();
        for (int i = 0; i < 30; ++i) {
          auto res = c.Post("/api/answer", answer("s" + std::to_string(i), "ann" + std::to_string(a)),
                            "application/json");
          if (res && res->status == 200) ++ok;
        }
      });
    }
    for (auto& t : clients) t.join();
    EXPECT_EQ(ok.load(), 90);
    auto res = server.client().Get("/index.html");
    ASSERT_TRUE(res);
    EXPECT_EQ(res->body, "<html>annotate</html>");
  }
  EXPECT_EQ(load_annotations(dir / "log.csv").size(), 90u);
}

TEST(Http, BindFailureThrows) {
  TempDir dir("svc");
  AnnotationSession session(sample(1), dir / "log.csv");
  Running first(session);
  ServerOptions o;
  o.host = "256.1.1.1";
  AnnotationServer bad(session, o);
  EXPECT_THROW(bad.bind(), Error);
}
