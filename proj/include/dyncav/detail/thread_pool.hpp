#pragma once

#include <condition_variable>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace dyncav::detail {

// Persistent pool for the per-step column-block work.  run() dispatches job
// indices 0..njobs-1; the calling thread participates, so a pool of size n
// uses n-1 workers.  Job payloads touch disjoint column blocks, so no locking
// is needed inside jobs.
class ThreadPool {
public:
    explicit ThreadPool(int threads) {
        const int workers = threads > 1 ? threads - 1 : 0;
        for (int i = 0; i < workers; ++i)
            workers_.emplace_back([this] { worker_loop(); });
    }

    ThreadPool(const ThreadPool&) = delete;
    ThreadPool& operator=(const ThreadPool&) = delete;

    ~ThreadPool() {
        {
            std::lock_guard<std::mutex> lock(mtx_);
            stop_ = true;
            ++generation_;
        }
        cv_start_.notify_all();
        for (auto& w : workers_)
            w.join();
    }

    void run(int njobs, const std::function<void(int)>& fn) {
        if (njobs <= 0)
            return;
        if (workers_.empty()) {
            for (int j = 0; j < njobs; ++j)
                fn(j);
            return;
        }
        {
            std::lock_guard<std::mutex> lock(mtx_);
            fn_ = &fn;
            njobs_ = njobs;
            next_job_ = 0;
            done_jobs_ = 0;
            ++generation_;
        }
        cv_start_.notify_all();
        work(fn);
        std::unique_lock<std::mutex> lock(mtx_);
        cv_done_.wait(lock, [this] { return done_jobs_ == njobs_; });
        fn_ = nullptr;
    }

private:
    void worker_loop() {
        std::uint64_t seen = 0;
        for (;;) {
            const std::function<void(int)>* fn = nullptr;
            {
                std::unique_lock<std::mutex> lock(mtx_);
                cv_start_.wait(lock, [&] { return stop_ || generation_ != seen; });
                seen = generation_;
                if (stop_)
                    return;
                fn = fn_;
            }
            if (fn)
                work(*fn);
        }
    }

    void work(const std::function<void(int)>& fn) {
        for (;;) {
            int job;
            {
                std::lock_guard<std::mutex> lock(mtx_);
                if (next_job_ >= njobs_)
                    return;
                job = next_job_++;
            }
            fn(job);
            {
                std::lock_guard<std::mutex> lock(mtx_);
                if (++done_jobs_ == njobs_)
                    cv_done_.notify_one();
            }
        }
    }

    std::vector<std::thread> workers_;
    std::mutex mtx_;
    std::condition_variable cv_start_, cv_done_;
    const std::function<void(int)>* fn_ = nullptr;
    int njobs_ = 0;
    int next_job_ = 0;
    int done_jobs_ = 0;
    std::uint64_t generation_ = 0;
    bool stop_ = false;
};

} // namespace dyncav::detail
