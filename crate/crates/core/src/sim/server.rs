//! Processor-sharing server using virtual time.
//!
//! With `n` jobs in service every job receives `rate / n` units of service
//! per second. The server tracks the service `V` a job present since the
//! last idle period would have received; a job arriving when the virtual
//! clock reads `V_a` with length `L` finishes when it reaches `V_a + L`, so
//! the job with the smallest finish tag always completes first.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, VecDeque};

/// Completions due within this many seconds of now are treated as due.
const TIME_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum JobState {
    Active,
    Done,
}

#[derive(Debug, Clone)]
pub(crate) struct Job {
    pub arrival: f64,
    pub deadline: f64,
    pub length: f64,
    pub redispatched: bool,
    pub state: JobState,
    // Queue entries still pointing at this slot.
    refs: u8,
}

#[derive(Debug, Default)]
pub(crate) struct JobSlab {
    jobs: Vec<Job>,
    free: Vec<u32>,
    live: u64,
}

impl JobSlab {
    pub fn insert(&mut self, arrival: f64, deadline: f64, length: f64) -> u32 {
        let job = Job {
            arrival,
            deadline,
            length,
            redispatched: false,
            state: JobState::Active,
            refs: 0,
        };
        self.live += 1;
        match self.free.pop() {
            Some(id) => {
                self.jobs[id as usize] = job;
                id
            }
            None => {
                self.jobs.push(job);
                (self.jobs.len() - 1) as u32
            }
        }
    }

    #[inline]
    pub fn get(&self, id: u32) -> &Job {
        &self.jobs[id as usize]
    }

    #[inline]
    pub fn get_mut(&mut self, id: u32) -> &mut Job {
        &mut self.jobs[id as usize]
    }

    /// Marks a job finished; its slot is reused once no queue refers to it.
    pub fn finish(&mut self, id: u32) {
        let j = &mut self.jobs[id as usize];
        debug_assert_eq!(j.state, JobState::Active);
        j.state = JobState::Done;
        self.live -= 1;
        if j.refs == 0 {
            self.free.push(id);
        }
    }

    #[inline]
    fn release(&mut self, id: u32) {
        let j = &mut self.jobs[id as usize];
        j.refs -= 1;
        if j.refs == 0 && j.state == JobState::Done {
            self.free.push(id);
        }
    }

    /// Jobs not yet completed or timed out.
    pub fn live(&self) -> u64 {
        self.live
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Outcome {
    Completed(u32),
    TimedOut(u32),
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Tag(f64);

impl Eq for Tag {}

impl PartialOrd for Tag {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Tag {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

#[derive(Debug)]
pub(crate) struct PsServer {
    rate: f64,
    vtime: f64,
    last: f64,
    active: u32,
    by_tag: BinaryHeap<Reverse<(Tag, u32)>>,
    // Arrival order; the front holds the earliest deadline.
    fifo: VecDeque<u32>,
    pub generation: u32,
}

impl PsServer {
    pub fn new(rate: f64, now: f64) -> Self {
        debug_assert!(rate > 0.0);
        PsServer {
            rate,
            vtime: 0.0,
            last: now,
            active: 0,
            by_tag: BinaryHeap::new(),
            fifo: VecDeque::new(),
            generation: 0,
        }
    }

    #[cfg(test)]
    pub fn active(&self) -> u32 {
        self.active
    }

    #[inline]
    fn advance(&mut self, now: f64) {
        if self.active > 0 {
            self.vtime += (now - self.last) * self.rate / self.active as f64;
        }
        self.last = now;
    }

    pub fn add(&mut self, now: f64, id: u32, slab: &mut JobSlab) {
        self.advance(now);
        let job = slab.get_mut(id);
        job.refs += 2;
        self.by_tag.push(Reverse((Tag(self.vtime + job.length), id)));
        self.fifo.push_back(id);
        self.active += 1;
    }

    fn clean_tops(&mut self, slab: &mut JobSlab) {
        while let Some(&Reverse((_, id))) = self.by_tag.peek() {
            if slab.get(id).state == JobState::Active {
                break;
            }
            self.by_tag.pop();
            slab.release(id);
        }
        while let Some(&id) = self.fifo.front() {
            if slab.get(id).state == JobState::Active {
                break;
            }
            self.fifo.pop_front();
            slab.release(id);
        }
    }

    fn completion_time(&self) -> Option<(f64, f64)> {
        let &Reverse((Tag(tag), _)) = self.by_tag.peek()?;
        Some((self.last + (tag - self.vtime) * self.active as f64 / self.rate, tag))
    }

    /// Time of the next completion or deadline, if any job is in service.
    pub fn next_time(&mut self, slab: &mut JobSlab) -> Option<f64> {
        self.clean_tops(slab);
        if self.active == 0 {
            return None;
        }
        let (done, _) = self.completion_time()?;
        let deadline = self.fifo.front().map_or(f64::INFINITY, |&id| slab.get(id).deadline);
        Some(done.min(deadline))
    }

    /// Retires every job that has completed or passed its deadline by `now`.
    pub fn process(&mut self, now: f64, slab: &mut JobSlab, out: &mut impl FnMut(Outcome, &JobSlab)) {
        self.advance(now);
        loop {
            self.clean_tops(slab);
            if self.active == 0 {
                break;
            }
            let (done, tag) = self.completion_time().expect("active server has jobs");
            // Rounding can leave a completion a hair after `now`.
            if done <= now + TIME_SLACK {
                let Reverse((_, id)) = self.by_tag.pop().expect("peeked");
                slab.release(id);
                self.vtime = self.vtime.max(tag);
                self.active -= 1;
                out(Outcome::Completed(id), slab);
                slab.finish(id);
                continue;
            }
            let &id = self.fifo.front().expect("active server has jobs");
            if slab.get(id).deadline <= now {
                self.fifo.pop_front();
                slab.release(id);
                self.active -= 1;
                out(Outcome::TimedOut(id), slab);
                slab.finish(id);
                continue;
            }
            break;
        }
        if self.active == 0 {
            self.reset(slab);
        }
    }

    fn reset(&mut self, slab: &mut JobSlab) {
        for Reverse((_, id)) in self.by_tag.drain() {
            slab.release(id);
        }
        for id in self.fifo.drain(..) {
            slab.release(id);
        }
        self.vtime = 0.0;
    }

    /// Removes every job, returning those still in service in arrival order.
    pub fn evacuate(&mut self, now: f64, slab: &mut JobSlab) -> Vec<u32> {
        self.advance(now);
        let alive: Vec<u32> = self
            .fifo
            .iter()
            .copied()
            .filter(|&id| slab.get(id).state == JobState::Active)
            .collect();
        self.reset(slab);
        self.active = 0;
        self.generation += 1;
        alive
    }
}

/// Indexed binary min-heap of per-server next event times, ordered by
/// `(time, server)`.
#[derive(Debug, Default)]
pub(crate) struct NextTimes {
    heap: Vec<u32>,
    pos: Vec<u32>,
    key: Vec<f64>,
}

const ABSENT: u32 = u32::MAX;

impl NextTimes {
    #[inline]
    fn less(&self, a: u32, b: u32) -> bool {
        let (ka, kb) = (self.key[a as usize], self.key[b as usize]);
        ka < kb || (ka == kb && a < b)
    }

    #[inline]
    pub fn peek(&self) -> Option<(f64, u32)> {
        self.heap.first().map(|&s| (self.key[s as usize], s))
    }

    pub fn set(&mut self, server: u32, time: f64) {
        let i = server as usize;
        if i >= self.pos.len() {
            self.pos.resize(i + 1, ABSENT);
            self.key.resize(i + 1, 0.0);
        }
        self.key[i] = time;
        if self.pos[i] == ABSENT {
            self.pos[i] = self.heap.len() as u32;
            self.heap.push(server);
            self.sift_up(self.heap.len() - 1);
        } else {
            let at = self.pos[i] as usize;
            self.sift_up(at);
            self.sift_down(self.pos[i] as usize);
        }
    }

    pub fn remove(&mut self, server: u32) {
        let i = server as usize;
        if i >= self.pos.len() || self.pos[i] == ABSENT {
            return;
        }
        let at = self.pos[i] as usize;
        let last = self.heap.len() - 1;
        self.swap(at, last);
        self.heap.pop();
        self.pos[i] = ABSENT;
        if at < self.heap.len() {
            self.sift_up(at);
            self.sift_down(self.pos[self.heap[at] as usize] as usize);
        }
    }

    #[inline]
    fn swap(&mut self, a: usize, b: usize) {
        self.heap.swap(a, b);
        self.pos[self.heap[a] as usize] = a as u32;
        self.pos[self.heap[b] as usize] = b as u32;
    }

    fn sift_up(&mut self, mut i: usize) {
        while i > 0 {
            let parent = (i - 1) / 2;
            if !self.less(self.heap[i], self.heap[parent]) {
                break;
            }
            self.swap(i, parent);
            i = parent;
        }
    }

    fn sift_down(&mut self, mut i: usize) {
        loop {
            let (l, r) = (2 * i + 1, 2 * i + 2);
            let mut m = i;
            if l < self.heap.len() && self.less(self.heap[l], self.heap[m]) {
                m = l;
            }
            if r < self.heap.len() && self.less(self.heap[r], self.heap[m]) {
                m = r;
            }
            if m == i {
                break;
            }
            self.swap(i, m);
            i = m;
        }
    }
}
