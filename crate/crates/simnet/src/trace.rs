//! Event records and their line export.
//!
//! Export columns, fixed: `time_us,node,record_kind,op_id,detail`. `op_id` is
//! `initiator:op` or `-`. `detail` never contains a comma.

use std::collections::BTreeSet;
use std::fmt;
use std::io::{self, Write};

use lrw_core::{NodeId, OpKey, Outcome, TimerId};

pub const TRACE_HEADER: &str = "time_us,node,record_kind,op_id,detail";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum RecordKind {
    Invoke,
    Return,
    Send,
    Deliver,
    Drop,
    Ack,
    TimerStart,
    TimerFire,
    TimerCancel,
    Engage,
    Commit,
    Discard,
    SelfCommit,
    Ignore,
    LinkUp,
    LinkDown,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Invoke => "Invoke",
            RecordKind::Return => "Return",
            RecordKind::Send => "Send",
            RecordKind::Deliver => "Deliver",
            RecordKind::Drop => "Drop",
            RecordKind::Ack => "Ack",
            RecordKind::TimerStart => "TimerStart",
            RecordKind::TimerFire => "TimerFire",
            RecordKind::TimerCancel => "TimerCancel",
            RecordKind::Engage => "Engage",
            RecordKind::Commit => "Commit",
            RecordKind::Discard => "Discard",
            RecordKind::SelfCommit => "SelfCommit",
            RecordKind::Ignore => "Ignore",
            RecordKind::LinkUp => "LinkUp",
            RecordKind::LinkDown => "LinkDown",
        }
    }
}

/// Per-kind payload.
///
/// For `Send`, `peer` is the unicast destination (`None` for broadcast). For
/// `Deliver` and `Drop` the record's node is the receiver and `peer` the
/// sender. For `Ack` the record's node is the original sender, `peer` the
/// acknowledging node, and `msg` the reply carried on the ack frame, if any.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Detail {
    None,
    Frame {
        msg: &'static str,
        peer: Option<NodeId>,
        frame: u64,
    },
    Timer(TimerId),
    Outcome(Outcome),
    Invitees(BTreeSet<NodeId>),
    Reason(&'static str),
    Peer(NodeId),
}

impl fmt::Display for Detail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Detail::None => f.write_str("-"),
            Detail::Frame { msg, peer, frame } => {
                write!(f, "{msg} peer=")?;
                match peer {
                    Some(p) => write!(f, "{p}")?,
                    None => f.write_str("*")?,
                }
                write!(f, " frame={frame}")
            }
            Detail::Timer(t) => write!(f, "{t}"),
            Detail::Outcome(o) => f.write_str(o.as_str()),
            Detail::Invitees(set) => {
                f.write_str("invitees=")?;
                for (i, n) in set.iter().enumerate() {
                    if i > 0 {
                        f.write_str(";")?;
                    }
                    write!(f, "{n}")?;
                }
                Ok(())
            }
            Detail::Reason(r) => f.write_str(r),
            Detail::Peer(p) => write!(f, "peer={p}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Record {
    pub time_us: u64,
    pub node: NodeId,
    pub kind: RecordKind,
    pub op: Option<OpKey>,
    pub detail: Detail,
}

impl Record {
    /// Message label for frame-carrying records.
    pub fn msg(&self) -> Option<&'static str> {
        match self.detail {
            Detail::Frame { msg, .. } => Some(msg),
            _ => None,
        }
    }

    pub fn peer(&self) -> Option<NodeId> {
        match self.detail {
            Detail::Frame { peer, .. } => peer,
            Detail::Peer(p) => Some(p),
            _ => None,
        }
    }

    pub fn frame(&self) -> Option<u64> {
        match self.detail {
            Detail::Frame { frame, .. } => Some(frame),
            _ => None,
        }
    }

    pub fn outcome(&self) -> Option<Outcome> {
        match self.detail {
            Detail::Outcome(o) => Some(o),
            _ => None,
        }
    }
}

impl fmt::Display for Record {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{},", self.time_us, self.node, self.kind.as_str())?;
        match self.op {
            Some(op) => write!(f, "{op}")?,
            None => f.write_str("-")?,
        }
        write!(f, ",{}", self.detail)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Trace {
    records: Vec<Record>,
}

impl Trace {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, record: Record) {
        self.records.push(record);
    }

    pub fn records(&self) -> &[Record] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Record> {
        self.records.iter()
    }

    pub fn of_kind(&self, kind: RecordKind) -> impl Iterator<Item = &Record> {
        self.records.iter().filter(move |r| r.kind == kind)
    }

    pub fn count(&self, kind: RecordKind) -> usize {
        self.of_kind(kind).count()
    }

    /// Writes the header and one line per record.
    pub fn export<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "{TRACE_HEADER}")?;
        self.export_records(&mut w)
    }

    /// Writes records without a header.
    pub fn export_records<W: Write>(&self, mut w: W) -> io::Result<()> {
        for r in &self.records {
            writeln!(w, "{r}")?;
        }
        Ok(())
    }

    pub fn to_export_string(&self) -> String {
        let mut buf = Vec::new();
        self.export(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("export is ASCII")
    }

    /// Checks that each Deliver follows a Send of the same frame and each
    /// Return follows an Invoke of the same operation.
    pub fn check_causality(&self) -> Result<(), String> {
        let mut sent = BTreeSet::new();
        let mut invoked = BTreeSet::new();
        for r in &self.records {
            match r.kind {
                RecordKind::Send => {
                    sent.insert(r.frame());
                }
                RecordKind::Deliver if !sent.contains(&r.frame()) => {
                    return Err(format!("deliver without send: {r}"));
                }
                RecordKind::Invoke => {
                    invoked.insert((r.node, r.op));
                }
                RecordKind::Return if !invoked.contains(&(r.node, r.op)) => {
                    return Err(format!("return without invoke: {r}"));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

impl<'a> IntoIterator for &'a Trace {
    type Item = &'a Record;
    type IntoIter = std::slice::Iter<'a, Record>;

    fn into_iter(self) -> Self::IntoIter {
        self.records.iter()
    }
}
