//! The event loop.
//!
//! Each node owns a FIFO transmitter: a frame waits for the previous one to
//! leave, then backs off for one MAC draw and goes on air. A broadcast is one
//! on-air event shared by every receiver; each receiver draws loss on its
//! own. With hardware acks on, a unicast sender stays busy until the ack
//! slot has passed, and a unicast reply the receiver emits while handling the
//! frame rides on that ack instead of contending for the channel.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use lrw_core::{Destination, NodeId, OpKey, TimerId};
use rand::Rng;

use crate::error::SimError;
use crate::queue::EventQueue;
use crate::radio::RadioModel;
use crate::rng::SimRng;
use crate::topology::Topology;
use crate::trace::{Detail, Record, RecordKind, Trace};

pub trait SimMessage: Clone + fmt::Debug {
    fn label(&self) -> &'static str;
    fn op(&self) -> Option<OpKey>;
}

/// A node-local protocol driven by the engine.
pub trait Behavior {
    type Msg: SimMessage;
    type Request;

    fn invoke(&mut self, request: Self::Request, io: &mut NodeIo<Self::Msg>) -> Result<(), &'static str>;
    fn on_message(&mut self, from: NodeId, msg: &Self::Msg, io: &mut NodeIo<Self::Msg>);
    fn on_timer(&mut self, timer: TimerId, io: &mut NodeIo<Self::Msg>);
    /// A bare hardware ack for a unicast this node sent.
    fn on_ack(&mut self, _from: NodeId, _io: &mut NodeIo<Self::Msg>) {}
    fn is_idle(&self) -> bool;
}

#[derive(Clone, Debug, PartialEq)]
pub enum Effect<M> {
    Send {
        msg: M,
        dest: Destination,
    },
    StartTimer {
        timer: TimerId,
        after_us: u64,
        op: Option<OpKey>,
    },
    StopTimer(TimerId),
    Note {
        kind: RecordKind,
        op: Option<OpKey>,
        detail: Detail,
    },
}

/// What a handler sees of the world, and where its effects are collected.
pub struct NodeIo<M> {
    now: u64,
    node: NodeId,
    neighbors: BTreeSet<NodeId>,
    effects: Vec<Effect<M>>,
}

impl<M> NodeIo<M> {
    pub fn new(now: u64, node: NodeId, neighbors: BTreeSet<NodeId>) -> Self {
        NodeIo {
            now,
            node,
            neighbors,
            effects: Vec::new(),
        }
    }

    pub fn now(&self) -> u64 {
        self.now
    }

    pub fn node(&self) -> NodeId {
        self.node
    }

    pub fn neighbors(&self) -> &BTreeSet<NodeId> {
        &self.neighbors
    }

    pub fn send(&mut self, msg: M, dest: Destination) {
        self.effects.push(Effect::Send { msg, dest });
    }

    pub fn broadcast(&mut self, msg: M) {
        self.send(msg, Destination::Broadcast);
    }

    pub fn unicast(&mut self, to: NodeId, msg: M) {
        self.send(msg, Destination::Unicast(to));
    }

    /// Re-arming a running timer replaces it.
    pub fn start_timer(&mut self, timer: TimerId, after_us: u64, op: Option<OpKey>) {
        self.effects.push(Effect::StartTimer { timer, after_us, op });
    }

    pub fn stop_timer(&mut self, timer: TimerId) {
        self.effects.push(Effect::StopTimer(timer));
    }

    pub fn note(&mut self, kind: RecordKind, op: Option<OpKey>, detail: Detail) {
        self.effects.push(Effect::Note { kind, op, detail });
    }

    pub fn effects(&self) -> &[Effect<M>] {
        &self.effects
    }

    pub fn into_effects(self) -> Vec<Effect<M>> {
        self.effects
    }
}

/// How broadcast sends reach the air.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Primitive {
    /// One on-air event per broadcast.
    #[default]
    Broadcast,
    /// Each broadcast becomes one unicast per current neighbor, in id order.
    UnicastFanout,
}

/// A single link transmission, as seen by a drop filter.
pub struct LinkAttempt<'a, M> {
    pub time_us: u64,
    pub from: NodeId,
    pub to: NodeId,
    pub frame: u64,
    pub msg: &'a M,
}

/// Returns true to force a drop. Consulted after the random loss draw, so
/// installing a filter does not shift the random stream.
pub type DropFilter<M> = Box<dyn FnMut(&LinkAttempt<'_, M>) -> bool + Send>;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RunStats {
    pub events: u64,
    pub end_time_us: u64,
}

struct Frame<M> {
    id: u64,
    msg: M,
    dest: Destination,
}

struct Tx<M> {
    queue: VecDeque<Frame<M>>,
    busy: bool,
}

impl<M> Default for Tx<M> {
    fn default() -> Self {
        Tx {
            queue: VecDeque::new(),
            busy: false,
        }
    }
}

enum Event<M, R> {
    Invoke {
        node: NodeId,
        request: R,
    },
    OnAir {
        sender: NodeId,
    },
    Deliver {
        to: NodeId,
        from: NodeId,
        frame: u64,
        unicast: bool,
        msg: M,
    },
    Ack {
        to: NodeId,
        from: NodeId,
        frame: u64,
        reply: Option<M>,
    },
    TxFree {
        node: NodeId,
    },
    Timer {
        node: NodeId,
        timer: TimerId,
        generation: u64,
    },
    Churn,
}

pub const DEFAULT_MAX_EVENTS: u64 = 50_000_000;

pub struct Engine<B: Behavior> {
    queue: EventQueue<Event<B::Msg, B::Request>>,
    nodes: BTreeMap<NodeId, B>,
    topology: Topology,
    radio: RadioModel,
    primitive: Primitive,
    rng: SimRng,
    trace: Trace,
    timers: BTreeMap<(NodeId, TimerId), (u64, Option<OpKey>)>,
    timer_generation: u64,
    tx: BTreeMap<NodeId, Tx<B::Msg>>,
    next_frame: u64,
    pending_invokes: BTreeSet<NodeId>,
    /// Queued events other than churn; the run is quiescent at zero.
    live_events: usize,
    drop_filter: Option<DropFilter<B::Msg>>,
    max_events: u64,
    processed: u64,
}

impl<B: Behavior> Engine<B> {
    /// Every topology node needs a behavior and vice versa.
    pub fn new(
        topology: Topology,
        radio: RadioModel,
        rng: SimRng,
        nodes: BTreeMap<NodeId, B>,
    ) -> Result<Self, SimError> {
        radio.validate()?;
        if !topology.is_symmetric() || !topology.within_potential() {
            return Err(SimError::InvalidTopology("asymmetric neighbor relation".into()));
        }
        if let Some(n) = topology.nodes().find(|n| !nodes.contains_key(n)) {
            return Err(SimError::UnknownNode(n));
        }
        if let Some(n) = nodes.keys().find(|n| !topology.contains(**n)) {
            return Err(SimError::UnknownNode(*n));
        }
        let mut engine = Engine {
            queue: EventQueue::new(),
            nodes,
            topology,
            radio,
            primitive: Primitive::Broadcast,
            rng,
            trace: Trace::new(),
            timers: BTreeMap::new(),
            timer_generation: 0,
            tx: BTreeMap::new(),
            next_frame: 0,
            pending_invokes: BTreeSet::new(),
            live_events: 0,
            drop_filter: None,
            max_events: DEFAULT_MAX_EVENTS,
            processed: 0,
        };
        engine.schedule_churn();
        Ok(engine)
    }

    pub fn with_primitive(mut self, primitive: Primitive) -> Self {
        self.primitive = primitive;
        self
    }

    pub fn with_drop_filter(mut self, filter: DropFilter<B::Msg>) -> Self {
        self.drop_filter = Some(filter);
        self
    }

    pub fn with_max_events(mut self, max_events: u64) -> Self {
        self.max_events = max_events;
        self
    }

    pub fn now(&self) -> u64 {
        self.queue.now()
    }

    pub fn trace(&self) -> &Trace {
        &self.trace
    }

    pub fn topology(&self) -> &Topology {
        &self.topology
    }

    pub fn node(&self, id: NodeId) -> Option<&B> {
        self.nodes.get(&id)
    }

    pub fn nodes(&self) -> &BTreeMap<NodeId, B> {
        &self.nodes
    }

    pub fn into_parts(self) -> (Trace, BTreeMap<NodeId, B>) {
        (self.trace, self.nodes)
    }

    /// Schedules one invocation per listed initiator, all at `at`.
    pub fn trigger_series(
        &mut self,
        requests: Vec<(NodeId, B::Request)>,
        at: u64,
    ) -> Result<usize, SimError> {
        let mut seen = BTreeSet::new();
        for (node, _) in &requests {
            let behavior = self.nodes.get(node).ok_or(SimError::UnknownNode(*node))?;
            if !behavior.is_idle() || self.pending_invokes.contains(node) || !seen.insert(*node) {
                return Err(SimError::InitiatorBusy(*node));
            }
        }
        let count = requests.len();
        for (node, request) in requests {
            self.pending_invokes.insert(node);
            self.schedule(at, Event::Invoke { node, request });
        }
        Ok(count)
    }

    /// Runs until no protocol events remain. Churn alone does not keep the
    /// run alive.
    pub fn run(&mut self) -> Result<RunStats, SimError> {
        while self.live_events > 0 {
            self.step()?;
        }
        Ok(self.stats())
    }

    /// Processes every event at or before `until_us`.
    pub fn run_until(&mut self, until_us: u64) -> Result<RunStats, SimError> {
        while self.queue.peek_time().is_some_and(|t| t <= until_us) {
            self.step()?;
        }
        Ok(self.stats())
    }

    fn stats(&self) -> RunStats {
        RunStats {
            events: self.processed,
            end_time_us: self.queue.now(),
        }
    }

    fn step(&mut self) -> Result<(), SimError> {
        if self.processed >= self.max_events {
            return Err(SimError::EventBudgetExceeded(self.max_events));
        }
        let Some((_, event)) = self.queue.pop() else { return Ok(()) };
        self.processed += 1;
        if !matches!(event, Event::Churn) {
            self.live_events -= 1;
        }
        self.handle(event);
        Ok(())
    }

    fn schedule(&mut self, at: u64, event: Event<B::Msg, B::Request>) {
        if !matches!(event, Event::Churn) {
            self.live_events += 1;
        }
        self.queue.schedule(at, event);
    }

    fn record(&mut self, node: NodeId, kind: RecordKind, op: Option<OpKey>, detail: Detail) {
        self.trace.push(Record {
            time_us: self.queue.now(),
            node,
            kind,
            op,
            detail,
        });
    }

    fn handle(&mut self, event: Event<B::Msg, B::Request>) {
        match event {
            Event::Invoke { node, request } => {
                self.pending_invokes.remove(&node);
                let mut result = Ok(());
                let effects = self.dispatch(node, |b, io| result = b.invoke(request, io));
                if let Err(reason) = result {
                    self.record(node, RecordKind::Ignore, None, Detail::Reason(reason));
                }
                self.apply(node, effects);
            }
            Event::OnAir { sender } => self.on_air(sender),
            Event::Deliver {
                to,
                from,
                frame,
                unicast,
                msg,
            } => self.deliver(to, from, frame, unicast, msg),
            Event::Ack {
                to,
                from,
                frame,
                reply,
            } => {
                let detail = Detail::Frame {
                    msg: reply.as_ref().map_or("ack", |m| m.label()),
                    peer: Some(from),
                    frame,
                };
                self.record(to, RecordKind::Ack, reply.as_ref().and_then(|m| m.op()), detail);
                let effects = match reply {
                    Some(msg) => self.dispatch(to, |b, io| b.on_message(from, &msg, io)),
                    None => self.dispatch(to, |b, io| b.on_ack(from, io)),
                };
                self.apply(to, effects);
            }
            Event::TxFree { node } => self.free_tx(node),
            Event::Timer {
                node,
                timer,
                generation,
            } => {
                let Some(&(armed, op)) = self.timers.get(&(node, timer)) else { return };
                if armed != generation {
                    return;
                }
                self.timers.remove(&(node, timer));
                self.record(node, RecordKind::TimerFire, op, Detail::Timer(timer));
                let effects = self.dispatch(node, |b, io| b.on_timer(timer, io));
                self.apply(node, effects);
            }
            Event::Churn => {
                self.flip_random_link();
                self.schedule_churn();
            }
        }
    }

    fn dispatch<F>(&mut self, node: NodeId, f: F) -> Vec<Effect<B::Msg>>
    where
        F: FnOnce(&mut B, &mut NodeIo<B::Msg>),
    {
        let mut io = NodeIo::new(self.queue.now(), node, self.topology.neighbors(node).clone());
        if let Some(behavior) = self.nodes.get_mut(&node) {
            f(behavior, &mut io);
        }
        io.effects
    }

    fn apply(&mut self, node: NodeId, effects: Vec<Effect<B::Msg>>) {
        let now = self.queue.now();
        for effect in effects {
            match effect {
                Effect::Send { msg, dest } => match (dest, self.primitive) {
                    (Destination::Broadcast, Primitive::UnicastFanout) => {
                        let targets: Vec<NodeId> =
                            self.topology.neighbors(node).iter().copied().collect();
                        for to in targets {
                            self.enqueue(node, msg.clone(), Destination::Unicast(to));
                        }
                    }
                    _ => self.enqueue(node, msg, dest),
                },
                Effect::StartTimer {
                    timer,
                    after_us,
                    op,
                } => {
                    self.timer_generation += 1;
                    let generation = self.timer_generation;
                    self.timers.insert((node, timer), (generation, op));
                    self.record(node, RecordKind::TimerStart, op, Detail::Timer(timer));
                    self.schedule(
                        now + after_us,
                        Event::Timer {
                            node,
                            timer,
                            generation,
                        },
                    );
                }
                Effect::StopTimer(timer) => {
                    if let Some((_, op)) = self.timers.remove(&(node, timer)) {
                        self.record(node, RecordKind::TimerCancel, op, Detail::Timer(timer));
                    }
                }
                Effect::Note { kind, op, detail } => self.record(node, kind, op, detail),
            }
        }
    }

    fn enqueue(&mut self, sender: NodeId, msg: B::Msg, dest: Destination) {
        let id = self.next_frame;
        self.next_frame += 1;
        let peer = match dest {
            Destination::Broadcast => None,
            Destination::Unicast(to) => Some(to),
        };
        let detail = Detail::Frame {
            msg: msg.label(),
            peer,
            frame: id,
        };
        self.record(sender, RecordKind::Send, msg.op(), detail);
        let tx = self.tx.entry(sender).or_default();
        tx.queue.push_back(Frame { id, msg, dest });
        if !tx.busy {
            self.start_tx(sender);
        }
    }

    fn start_tx(&mut self, sender: NodeId) {
        self.tx.entry(sender).or_default().busy = true;
        let backoff = self.radio.draw_mac(&mut self.rng);
        let at = self.queue.now() + backoff;
        self.schedule(at, Event::OnAir { sender });
    }

    fn free_tx(&mut self, sender: NodeId) {
        let tx = self.tx.entry(sender).or_default();
        tx.busy = false;
        if !tx.queue.is_empty() {
            self.start_tx(sender);
        }
    }

    fn on_air(&mut self, sender: NodeId) {
        let Some(frame) = self.tx.get_mut(&sender).and_then(|tx| tx.queue.pop_front()) else {
            return;
        };
        let now = self.queue.now();
        let (receivers, unicast): (Vec<NodeId>, bool) = match frame.dest {
            Destination::Broadcast => (self.topology.neighbors(sender).iter().copied().collect(), false),
            Destination::Unicast(to) => (vec![to], true),
        };
        let label = frame.msg.label();
        let op = frame.msg.op();
        for to in receivers {
            let linked = self.topology.is_linked(sender, to);
            let mut lost = !linked || self.radio.draw_lost(&mut self.rng, sender, to);
            if let Some(filter) = self.drop_filter.as_mut() {
                let attempt = LinkAttempt {
                    time_us: now,
                    from: sender,
                    to,
                    frame: frame.id,
                    msg: &frame.msg,
                };
                lost |= filter(&attempt);
            }
            let detail = Detail::Frame {
                msg: label,
                peer: Some(sender),
                frame: frame.id,
            };
            if lost {
                self.record(to, RecordKind::Drop, op, detail);
            } else {
                self.schedule(
                    now + self.radio.proc_delay_us,
                    Event::Deliver {
                        to,
                        from: sender,
                        frame: frame.id,
                        unicast,
                        msg: frame.msg.clone(),
                    },
                );
            }
        }
        if unicast && self.radio.unicast_hw_ack {
            let at = now + self.radio.proc_delay_us + self.radio.ack_delay_us;
            self.schedule(at, Event::TxFree { node: sender });
        } else {
            self.free_tx(sender);
        }
    }

    fn deliver(&mut self, to: NodeId, from: NodeId, frame: u64, unicast: bool, msg: B::Msg) {
        let detail = Detail::Frame {
            msg: msg.label(),
            peer: Some(from),
            frame,
        };
        self.record(to, RecordKind::Deliver, msg.op(), detail);
        let mut effects = self.dispatch(to, |b, io| b.on_message(from, &msg, io));
        if unicast && self.radio.unicast_hw_ack {
            let reply_at = effects.iter().position(
                |e| matches!(e, Effect::Send { dest: Destination::Unicast(d), .. } if *d == from),
            );
            let reply = reply_at.map(|i| match effects.remove(i) {
                Effect::Send { msg, .. } => msg,
                _ => unreachable!("position matched a send"),
            });
            let at = self.queue.now() + self.radio.ack_delay_us;
            self.schedule(
                at,
                Event::Ack {
                    to: from,
                    from: to,
                    frame,
                    reply,
                },
            );
        }
        self.apply(to, effects);
    }

    fn schedule_churn(&mut self) {
        let Some(rate) = self.topology.churn_rate() else { return };
        let links = self.topology.potential_links().len();
        if links == 0 {
            return;
        }
        let total_per_us = rate * links as f64 / 1e6;
        let u: f64 = self.rng.gen_range(f64::MIN_POSITIVE..1.0);
        let wait = (-u.ln() / total_per_us).ceil() as u64;
        let at = self.queue.now() + wait.max(1);
        self.schedule(at, Event::Churn);
    }

    fn flip_random_link(&mut self) {
        let links = self.topology.potential_links();
        let (a, b) = links[self.rng.gen_range(0..links.len())];
        let up = !self.topology.is_linked(a, b);
        self.topology
            .set_link(a, b, up)
            .expect("flipping a potential link");
        let kind = if up { RecordKind::LinkUp } else { RecordKind::LinkDown };
        self.record(a, kind, None, Detail::Peer(b));
    }
}
