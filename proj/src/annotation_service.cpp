#include "mmdial/annotation_service.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <charconv>
#include <cstring>

#include "httplib.h"
#include "mmdial/error.hpp"

namespace mmdial {

namespace {

void write_all(int fd, std::string_view data, const std::filesystem::path& path) {
  std::size_t done = 0;
  while (done < data.size()) {
    auto n = ::write(fd, data.data() + done, data.size() - done);
    if (n < 0) {
      if (errno == EINTR) continue;
      throw Error("append to " + path.string() + " failed: " + std::strerror(errno));
    }
    done += static_cast<std::size_t>(n);
  }
}

}  // namespace

AnnotationLog::AnnotationLog(std::filesystem::path path) : path_(std::move(path)) {
  fd_ = ::open(path_.c_str(), O_WRONLY | O_CREAT | O_APPEND, 0644);
  if (fd_ < 0) throw Error("cannot open annotation log " + path_.string() + ": " + std::strerror(errno));
  if (std::filesystem::file_size(path_) == 0) {
    write_all(fd_, std::string(kAnnotationHeader) + "\n", path_);
    ::fsync(fd_);
  }
}

AnnotationLog::~AnnotationLog() {
  if (fd_ >= 0) ::close(fd_);
}

std::vector<AnnotationRecord> AnnotationLog::replay() const { return load_annotations(path_); }

void AnnotationLog::append(const AnnotationRecord& record) {
  write_all(fd_, to_csv_row(record) + "\n", path_);
  if (::fsync(fd_) != 0) throw Error("fsync of " + path_.string() + " failed: " + std::strerror(errno));
}

AnnotationSession::AnnotationSession(std::vector<Instance> sample, const std::filesystem::path& log_path)
    : sample_(std::move(sample)), log_(log_path) {
  for (std::size_t i = 0; i < sample_.size(); ++i) {
    if (!position_.emplace(sample_[i].instance_id, i).second) {
      throw DuplicateError("sample lists instance " + sample_[i].instance_id + " twice");
    }
  }
  for (const auto& r : log_.replay()) answered_[r.annotator_id].insert(r.instance_id);
}

std::vector<const Instance*> AnnotationSession::batch(const std::string& annotator, std::size_t limit) const {
  std::shared_lock lock(mutex_);
  std::vector<const Instance*> out;
  auto it = answered_.find(annotator);
  for (const auto& inst : sample_) {
    if (out.size() >= limit) break;
    if (it != answered_.end() && it->second.contains(inst.instance_id)) continue;
    out.push_back(&inst);
  }
  return out;
}

AnnotationSession::Progress AnnotationSession::progress(const std::string& annotator) const {
  std::shared_lock lock(mutex_);
  Progress p;
  p.total = sample_.size();
  if (auto it = answered_.find(annotator); it != answered_.end()) {
    for (const auto& id : it->second) {
      if (position_.contains(id)) ++p.answered;
    }
  }
  return p;
}

AnnotationSession::Submit AnnotationSession::submit(const AnnotationRecord& record) {
  validate(record);
  if (!position_.contains(record.instance_id)) return Submit::kUnknownInstance;
  std::unique_lock lock(mutex_);
  auto& done = answered_[record.annotator_id];
  if (done.contains(record.instance_id)) return Submit::kDuplicate;
  log_.append(record);
  done.insert(record.instance_id);
  return Submit::kAccepted;
}

struct AnnotationServer::Impl {
  AnnotationSession& session;
  ServerOptions options;
  httplib::Server server;
  int port = -1;

  Impl(AnnotationSession& s, ServerOptions o) : session(s), options(std::move(o)) {}

  static void reply(httplib::Response& res, int status, const io::OrderedJson& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
  }

  static void fail(httplib::Response& res, int status, const std::string& message) {
    reply(res, status, {{"error", message}});
  }

  io::OrderedJson item_json(const Instance& inst) const {
    io::OrderedJson item;
    item["instance_id"] = inst.instance_id;
    item["target"] = inst.target;
    auto& ctx = item["context"] = io::OrderedJson::array();
    for (const auto& t : inst.context) ctx.push_back({{"speaker", t.speaker}, {"text", t.text}});
    item["image_ref"] = options.image_base + inst.image_id;
    item["questions"] = {{"q1", "3-point"}, {"q2", "3-point"}, {"q3", "5-point"}, {"q4", "choice-4"}};
    return item;
  }

  void routes() {
    server.Get("/api/batch", [this](const httplib::Request& req, httplib::Response& res) {
      auto annotator = req.get_param_value("annotator");
      if (annotator.empty()) return fail(res, 400, "missing annotator");
      std::size_t limit = 10;
      if (req.has_param("limit")) {
        auto text = req.get_param_value("limit");
        auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), limit);
        if (ec != std::errc() || ptr != text.data() + text.size()) return fail(res, 400, "limit must be an integer");
      }
      io::OrderedJson body;
      auto& items = body["items"] = io::OrderedJson::array();
      for (const auto* inst : session.batch(annotator, limit)) items.push_back(item_json(*inst));
      reply(res, 200, body);
    });

    server.Get("/api/progress", [this](const httplib::Request& req, httplib::Response& res) {
      auto annotator = req.get_param_value("annotator");
      if (annotator.empty()) return fail(res, 400, "missing annotator");
      auto p = session.progress(annotator);
      reply(res, 200, {{"answered", p.answered}, {"total", p.total}});
    });

    server.Post("/api/answer", [this](const httplib::Request& req, httplib::Response& res) {
      io::Json body;
      try {
        body = io::Json::parse(req.body);
      } catch (const io::Json::parse_error&) {
        return fail(res, 400, "body is not valid JSON");
      }
      if (!body.is_object()) return fail(res, 400, "body must be a JSON object");
      AnnotationRecord rec;
      auto text_field = [&](const char* name, std::string& out) {
        auto it = body.find(name);
        if (it == body.end() || !it->is_string() || it->get<std::string>().empty()) return false;
        out = it->get<std::string>();
        return true;
      };
      auto int_field = [&](const char* name, int& out) {
        auto it = body.find(name);
        if (it == body.end() || !it->is_number_integer()) return false;
        out = it->get<int>();
        return true;
      };
      if (!text_field("instance_id", rec.instance_id)) return fail(res, 400, "instance_id must be a string");
      if (!text_field("annotator_id", rec.annotator_id)) return fail(res, 400, "annotator_id must be a string");
      if (rec.instance_id.find(',') != std::string::npos || rec.annotator_id.find(',') != std::string::npos) {
        return fail(res, 400, "ids must not contain commas");
      }
      if (!int_field("q1", rec.q1) || !int_field("q2", rec.q2) || !int_field("q3", rec.q3)) {
        return fail(res, 400, "q1, q2 and q3 must be integers");
      }
      if (auto it = body.find("q4"); it != body.end() && !it->is_null()) {
        int q4 = 0;
        if (!int_field("q4", q4)) return fail(res, 400, "q4 must be an integer");
        rec.q4 = q4;
      }
      try {
        switch (session.submit(rec)) {
          case AnnotationSession::Submit::kAccepted:
            return reply(res, 200, {{"accepted", true}});
          case AnnotationSession::Submit::kDuplicate:
            return fail(res, 409, "already answered");
          case AnnotationSession::Submit::kUnknownInstance:
            return fail(res, 404, "unknown instance " + rec.instance_id);
        }
      } catch (const RangeError& e) {
        return fail(res, 422, e.what());
      } catch (const Error& e) {
        return fail(res, 500, e.what());
      }
    });

    if (options.ui_dir && std::filesystem::is_directory(*options.ui_dir)) {
      server.set_mount_point("/", options.ui_dir->string());
    }
  }
};

AnnotationServer::AnnotationServer(AnnotationSession& session, ServerOptions options)
    : impl_(std::make_unique<Impl>(session, std::move(options))) {
  impl_->routes();
}

AnnotationServer::~AnnotationServer() { stop(); }

int AnnotationServer::bind() {
  auto& o = impl_->options;
  if (o.port == 0) {
    impl_->port = impl_->server.bind_to_any_port(o.host);
  } else {
    impl_->port = impl_->server.bind_to_port(o.host, o.port) ? o.port : -1;
  }
  if (impl_->port < 0) throw Error("cannot bind " + o.host + ":" + std::to_string(o.port));
  return impl_->port;
}

void AnnotationServer::listen() { impl_->server.listen_after_bind(); }

void AnnotationServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace mmdial
