//! Tick files in, one-second snapshot datasets out.
//!
//! # Tick format (version 1)
//!
//! A text file. The first line is the header `instrument,tick_size,date,version`
//! (for example `BTC-USD,0.01,2019-09-27,1`). Every following line is one event:
//!
//! ```text
//! timestamp_ns,kind,side,price_ticks,quantity,order_id
//! ```
//!
//! `kind` is `limit`, `cancel` or `market`; `side` is `bid` or `ask` (for
//! market events: the aggressor side). `price_ticks` and `order_id` are
//! integers; market events write 0 for both. Timestamps must not decrease.
//!
//! # Snapshot format (version 1)
//!
//! Line 1: `#snapshot,1,<instrument>,<tick_size>,<date>`. Line 2: the column
//! names (see [`snapshot_columns`]). Then one row per snapshot. Floats are
//! written with Rust's shortest round-trip formatting, so reading and
//! rewriting a file reproduces it byte for byte.

use std::fmt::Write as _;
use std::fs;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::features::{
    fit_normalizer, ladder_to_prices, FeatureError, FlowAccumulators, NormalizerStats, SnapshotFeatures,
    DEFAULT_WINDOWS, ESS_WIDTH, LEVELS, WINDOWS,
};
use crate::lob::{BookError, DepthLevel, EventKind, OrderBook, OrderEvent, OrderId, Side, Ticks};

pub const TICK_FORMAT_VERSION: u32 = 1;
pub const SNAPSHOT_FORMAT_VERSION: u32 = 1;
pub const NANOS_PER_SECOND: i64 = 1_000_000_000;
const SECONDS_PER_DAY: usize = 86_400;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("line {line}: timestamp {timestamp} is earlier than the previous event")]
    OutOfOrderTimestamp { line: usize, timestamp: i64 },
    #[error("line {line}: unknown event kind {kind:?}")]
    UnknownEventKind { line: usize, kind: String },
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> PipelineError + '_ {
    move |source| PipelineError::Io { path: path.to_path_buf(), source }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickHeader {
    pub instrument: String,
    pub tick_size: f64,
    pub date: String,
    pub version: u32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TickFile {
    pub header: TickHeader,
    pub events: Vec<OrderEvent>,
}

fn parse_header(line: &str) -> Result<TickHeader, PipelineError> {
    let fields: Vec<&str> = line.trim_end().split(',').collect();
    let [instrument, tick_size, date, version] = fields[..] else {
        return Err(PipelineError::MalformedHeader(format!("expected 4 fields, got {}", fields.len())));
    };
    let tick_size: f64 = tick_size
        .parse()
        .map_err(|_| PipelineError::MalformedHeader(format!("bad tick size {tick_size:?}")))?;
    if !(tick_size > 0.0 && tick_size.is_finite()) {
        return Err(PipelineError::MalformedHeader(format!("tick size must be positive, got {tick_size}")));
    }
    let version: u32 = version
        .parse()
        .map_err(|_| PipelineError::MalformedHeader(format!("bad version {version:?}")))?;
    if version != TICK_FORMAT_VERSION {
        return Err(PipelineError::MalformedHeader(format!("unsupported tick format version {version}")));
    }
    if instrument.is_empty() {
        return Err(PipelineError::MalformedHeader("empty instrument".into()));
    }
    Ok(TickHeader { instrument: instrument.to_string(), tick_size, date: date.to_string(), version })
}

fn parse_event(line: &str, line_no: usize) -> Result<OrderEvent, PipelineError> {
    let bad = |message: String| PipelineError::MalformedRow { line: line_no, message };
    let fields: Vec<&str> = line.split(',').collect();
    let [ts, kind, side, price, qty, id] = fields[..] else {
        return Err(bad(format!("expected 6 fields, got {}", fields.len())));
    };
    let kind = match kind {
        "limit" => EventKind::Limit,
        "cancel" => EventKind::Cancel,
        "market" => EventKind::Market,
        other => return Err(PipelineError::UnknownEventKind { line: line_no, kind: other.to_string() }),
    };
    let side = match side {
        "bid" => Side::Bid,
        "ask" => Side::Ask,
        other => return Err(bad(format!("unknown side {other:?}"))),
    };
    let event = OrderEvent {
        kind,
        side,
        timestamp_ns: ts.parse().map_err(|_| bad(format!("bad timestamp {ts:?}")))?,
        price: price.parse::<Ticks>().map_err(|_| bad(format!("bad price {price:?}")))?,
        quantity: qty.parse().map_err(|_| bad(format!("bad quantity {qty:?}")))?,
        order_id: OrderId(id.parse().map_err(|_| bad(format!("bad order id {id:?}")))?),
    };
    event.validate().map_err(|e| bad(e.to_string()))?;
    Ok(event)
}

pub fn read_ticks<R: BufRead>(reader: R) -> Result<TickFile, PipelineError> {
    let mut lines = reader.lines();
    let header_line = lines
        .next()
        .ok_or_else(|| PipelineError::MalformedHeader("empty file".into()))?
        .map_err(|e| PipelineError::MalformedHeader(e.to_string()))?;
    let header = parse_header(&header_line)?;
    let mut events = Vec::new();
    let mut last_ts = i64::MIN;
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        let line = line.map_err(|e| PipelineError::MalformedRow { line: line_no, message: e.to_string() })?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let event = parse_event(line, line_no)?;
        if event.timestamp_ns < last_ts {
            return Err(PipelineError::OutOfOrderTimestamp { line: line_no, timestamp: event.timestamp_ns });
        }
        last_ts = event.timestamp_ns;
        events.push(event);
    }
    Ok(TickFile { header, events })
}

pub fn parse_ticks(path: &Path) -> Result<TickFile, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_ticks(BufReader::new(file))
}

pub fn write_ticks<W: Write>(mut w: W, ticks: &TickFile) -> io::Result<()> {
    let h = &ticks.header;
    writeln!(w, "{},{},{},{}", h.instrument, h.tick_size, h.date, h.version)?;
    for e in &ticks.events {
        let kind = match e.kind {
            EventKind::Limit => "limit",
            EventKind::Cancel => "cancel",
            EventKind::Market => "market",
        };
        let side = match e.side {
            Side::Bid => "bid",
            Side::Ask => "ask",
        };
        writeln!(w, "{},{},{},{},{},{}", e.timestamp_ns, kind, side, e.price, e.quantity, e.order_id.0)?;
    }
    Ok(())
}

pub fn save_ticks(path: &Path, ticks: &TickFile) -> Result<(), PipelineError> {
    let file = fs::File::create(path).map_err(io_err(path))?;
    let mut w = BufWriter::new(file);
    write_ticks(&mut w, ticks).map_err(io_err(path))?;
    w.flush().map_err(io_err(path))
}

/// One snapshot: raw features plus the book and trade context they came from.
#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotRow {
    pub timestamp_ns: i64,
    pub midpoint: f64,
    pub best_bid: f64,
    pub best_ask: f64,
    pub buyer_notional: f64,
    pub seller_notional: f64,
    pub buyer_trades: u32,
    pub seller_trades: u32,
    pub ess: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SnapshotDataset {
    pub instrument: String,
    pub tick_size: f64,
    pub date: String,
    pub rows: Vec<SnapshotRow>,
}

impl SnapshotDataset {
    pub fn ess_rows(&self) -> Vec<&[f64]> {
        self.rows.iter().map(|r| r.ess.as_slice()).collect()
    }
}

/// Liquidity taken by an aggressive order during a snapshot interval.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct TradePrint {
    /// Side of the book the liquidity rested on.
    pub resting_side: Side,
    pub price: Ticks,
    pub quantity: f64,
}

/// Book context for one snapshot: the padded ladders at the snapshot time and
/// the trades that printed during the interval ending there.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketStep {
    pub bids: Vec<DepthLevel>,
    pub asks: Vec<DepthLevel>,
    pub trades: Vec<TradePrint>,
}

/// A replayed day: snapshot rows and their aligned book context.
#[derive(Clone, Debug, PartialEq)]
pub struct MarketDay {
    pub dataset: SnapshotDataset,
    pub steps: Vec<MarketStep>,
}

impl MarketDay {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn tick_size(&self) -> f64 {
        self.dataset.tick_size
    }
}

#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ReplayConfig {
    pub interval_ns: i64,
    pub windows: [usize; WINDOWS],
}

impl Default for ReplayConfig {
    fn default() -> Self {
        Self { interval_ns: NANOS_PER_SECOND, windows: DEFAULT_WINDOWS }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ReplayStats {
    pub events: usize,
    pub rejected: usize,
    pub rows: usize,
    /// Leading snapshots dropped because the book was not yet two-sided.
    pub skipped_rows: usize,
    pub limit_events: usize,
    pub cancel_events: usize,
    pub market_events: usize,
}

struct Replayer {
    book: OrderBook,
    flow: FlowAccumulators,
    features: SnapshotFeatures,
    trades: Vec<TradePrint>,
    last_mid: Option<f64>,
    bids: Vec<DepthLevel>,
    asks: Vec<DepthLevel>,
    day: MarketDay,
    stats: ReplayStats,
}

impl Replayer {
    fn emit(&mut self, timestamp_ns: i64) -> Result<(), PipelineError> {
        let mid = match self.book.midpoint() {
            Ok(mid) => Some(mid),
            Err(_) => self.last_mid,
        };
        let Some(mid) = mid else {
            self.stats.skipped_rows += 1;
            self.flow.reset();
            self.trades.clear();
            return Ok(());
        };
        self.last_mid = Some(mid);
        let tick = self.book.tick_size();
        self.book.depth_into(Side::Bid, LEVELS, &mut self.bids);
        self.book.depth_into(Side::Ask, LEVELS, &mut self.asks);
        let ess = self.features.snapshot(
            &ladder_to_prices(&self.bids, tick),
            &ladder_to_prices(&self.asks, tick),
            mid,
            &self.flow,
            0.0,
        )?;
        self.day.dataset.rows.push(SnapshotRow {
            timestamp_ns,
            midpoint: mid,
            best_bid: self.bids[0].price as f64 * tick,
            best_ask: self.asks[0].price as f64 * tick,
            buyer_notional: self.flow.buyer_notional,
            seller_notional: self.flow.seller_notional,
            buyer_trades: self.flow.buyer_trades,
            seller_trades: self.flow.seller_trades,
            ess: ess.to_vec(),
        });
        self.day.steps.push(MarketStep {
            bids: self.bids.clone(),
            asks: self.asks.clone(),
            trades: std::mem::take(&mut self.trades),
        });
        self.flow.reset();
        self.stats.rows += 1;
        Ok(())
    }
}

/// Replays every event through a fresh book, emitting a snapshot at each
/// interval boundary. A row at boundary `b` reflects all events with
/// timestamps before `b`; the first boundary is the first whole interval
/// after the first event. Intervals without events still produce a row.
/// Cancels of unknown orders are logged and skipped.
pub fn replay(ticks: &TickFile, config: &ReplayConfig) -> Result<(MarketDay, ReplayStats), PipelineError> {
    let header = &ticks.header;
    let mut r = Replayer {
        book: OrderBook::new(header.tick_size),
        flow: FlowAccumulators::default(),
        features: SnapshotFeatures::new(config.windows),
        trades: Vec::new(),
        last_mid: None,
        bids: Vec::with_capacity(LEVELS),
        asks: Vec::with_capacity(LEVELS),
        day: MarketDay {
            dataset: SnapshotDataset {
                instrument: header.instrument.clone(),
                tick_size: header.tick_size,
                date: header.date.clone(),
                rows: Vec::new(),
            },
            steps: Vec::new(),
        },
        stats: ReplayStats::default(),
    };
    let Some(first) = ticks.events.first() else {
        return Ok((r.day, r.stats));
    };
    let interval = config.interval_ns;
    let mut boundary = (first.timestamp_ns.div_euclid(interval) + 1) * interval;
    for event in &ticks.events {
        while event.timestamp_ns >= boundary {
            r.emit(boundary)?;
            boundary += interval;
        }
        r.stats.events += 1;
        match event.kind {
            EventKind::Limit => r.stats.limit_events += 1,
            EventKind::Cancel => r.stats.cancel_events += 1,
            EventKind::Market => r.stats.market_events += 1,
        }
        match r.book.apply(event) {
            Ok(outcome) => {
                r.flow.record(&outcome, header.tick_size);
                r.trades.extend(outcome.fills.iter().map(|f| TradePrint {
                    resting_side: f.side,
                    price: f.price,
                    quantity: f.quantity,
                }));
            }
            Err(BookError::UnknownOrder(_)) => r.stats.rejected += 1,
            Err(e) => return Err(e.into()),
        }
    }
    r.emit(boundary)?;
    if r.stats.rows > SECONDS_PER_DAY * (NANOS_PER_SECOND / interval).max(1) as usize {
        log::warn!("{}: {} snapshots span more than one day", header.date, r.stats.rows);
    } else if interval == NANOS_PER_SECOND && r.stats.rows < SECONDS_PER_DAY {
        log::info!("{}: partial day with {} snapshots", header.date, r.stats.rows);
    }
    Ok((r.day, r.stats))
}

pub fn replay_to_snapshots(ticks: &TickFile, config: &ReplayConfig) -> Result<SnapshotDataset, PipelineError> {
    replay(ticks, config).map(|(day, _)| day.dataset)
}

/// Column names after the leading `timestamp_ns` column.
pub fn snapshot_columns() -> Vec<String> {
    let mut cols: Vec<String> = [
        "timestamp_ns",
        "midpoint",
        "best_bid",
        "best_ask",
        "buyer_notional",
        "seller_notional",
        "buyer_trades",
        "seller_trades",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    for prefix in ["xi", "chi"] {
        for side in ["bid", "ask"] {
            cols.extend((0..LEVELS).map(|i| format!("{prefix}_{side}_{i}")));
        }
    }
    cols.extend((0..LEVELS).map(|i| format!("iota_{i}")));
    for side in ["bid", "ask"] {
        cols.extend((0..LEVELS).map(|i| format!("ofi_{side}_{i}")));
    }
    cols.extend((0..WINDOWS).map(|i| format!("tfi_notional_{i}")));
    cols.extend((0..WINDOWS).map(|i| format!("tfi_count_{i}")));
    cols.push("spread".into());
    cols.extend((0..WINDOWS).map(|i| format!("crsi_{i}")));
    cols.push("reward".into());
    cols
}

const SNAPSHOT_META_COLUMNS: usize = 8;

pub fn write_snapshots<W: Write>(mut w: W, ds: &SnapshotDataset) -> io::Result<()> {
    writeln!(w, "#snapshot,{},{},{},{}", SNAPSHOT_FORMAT_VERSION, ds.instrument, ds.tick_size, ds.date)?;
    writeln!(w, "{}", snapshot_columns().join(","))?;
    let mut line = String::with_capacity(4096);
    for r in &ds.rows {
        line.clear();
        let _ = write!(
            line,
            "{},{},{},{},{},{},{},{}",
            r.timestamp_ns,
            r.midpoint,
            r.best_bid,
            r.best_ask,
            r.buyer_notional,
            r.seller_notional,
            r.buyer_trades,
            r.seller_trades
        );
        for v in &r.ess {
            let _ = write!(line, ",{v}");
        }
        writeln!(w, "{line}")?;
    }
    Ok(())
}

/// Writes through a temporary sibling file so a failed write leaves no
/// partial output at `path`.
pub fn save_snapshots(path: &Path, ds: &SnapshotDataset) -> Result<(), PipelineError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let file = fs::File::create(&tmp).map_err(io_err(&tmp))?;
    let mut w = BufWriter::new(file);
    write_snapshots(&mut w, ds).map_err(io_err(&tmp))?;
    w.flush().map_err(io_err(&tmp))?;
    drop(w);
    fs::rename(&tmp, path).map_err(io_err(path))
}

pub fn read_snapshots<R: BufRead>(reader: R) -> Result<SnapshotDataset, PipelineError> {
    let mut lines = reader.lines();
    let mut next_line = |what: &str| -> Result<String, PipelineError> {
        lines
            .next()
            .ok_or_else(|| PipelineError::SchemaMismatch(format!("missing {what}")))?
            .map_err(|e| PipelineError::SchemaMismatch(e.to_string()))
    };
    let meta = next_line("schema line")?;
    let fields: Vec<&str> = meta.split(',').collect();
    let ["#snapshot", version, instrument, tick_size, date] = fields[..] else {
        return Err(PipelineError::SchemaMismatch(format!("not a snapshot file: {meta:?}")));
    };
    if version != SNAPSHOT_FORMAT_VERSION.to_string() {
        return Err(PipelineError::SchemaMismatch(format!("unsupported snapshot version {version}")));
    }
    let tick_size: f64 =
        tick_size.parse().map_err(|_| PipelineError::SchemaMismatch(format!("bad tick size {tick_size:?}")))?;
    let header = next_line("column header")?;
    if header != snapshot_columns().join(",") {
        return Err(PipelineError::SchemaMismatch("column header does not match version 1 layout".into()));
    }
    let mut ds = SnapshotDataset {
        instrument: instrument.to_string(),
        tick_size,
        date: date.to_string(),
        rows: Vec::new(),
    };
    let width = SNAPSHOT_META_COLUMNS + ESS_WIDTH;
    for (i, line) in lines.enumerate() {
        let line_no = i + 3;
        let line = line.map_err(|e| PipelineError::MalformedRow { line: line_no, message: e.to_string() })?;
        if line.is_empty() {
            continue;
        }
        let bad = |message: String| PipelineError::MalformedRow { line: line_no, message };
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != width {
            return Err(bad(format!("expected {width} fields, got {}", fields.len())));
        }
        let float = |s: &str| s.parse::<f64>().map_err(|_| bad(format!("bad number {s:?}")));
        let count = |s: &str| s.parse::<u32>().map_err(|_| bad(format!("bad count {s:?}")));
        ds.rows.push(SnapshotRow {
            timestamp_ns: fields[0].parse().map_err(|_| bad(format!("bad timestamp {:?}", fields[0])))?,
            midpoint: float(fields[1])?,
            best_bid: float(fields[2])?,
            best_ask: float(fields[3])?,
            buyer_notional: float(fields[4])?,
            seller_notional: float(fields[5])?,
            buyer_trades: count(fields[6])?,
            seller_trades: count(fields[7])?,
            ess: fields[SNAPSHOT_META_COLUMNS..].iter().map(|s| float(s)).collect::<Result<_, _>>()?,
        });
    }
    Ok(ds)
}

pub fn load_snapshots(path: &Path) -> Result<SnapshotDataset, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    read_snapshots(BufReader::new(file))
}

fn is_snapshot_file(path: &Path) -> Result<bool, PipelineError> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut first = String::new();
    BufReader::new(file).read_line(&mut first).map_err(io_err(path))?;
    Ok(first.starts_with("#snapshot,"))
}

/// Loads snapshot rows from either a snapshot file or a tick file (replayed
/// with `config`).
pub fn load_day_snapshots(path: &Path, config: &ReplayConfig) -> Result<SnapshotDataset, PipelineError> {
    if is_snapshot_file(path)? {
        load_snapshots(path)
    } else {
        replay_to_snapshots(&parse_ticks(path)?, config)
    }
}

/// Fits normalization on the raw feature rows of one day.
pub fn fit_day(dataset: &SnapshotDataset) -> Result<NormalizerStats, PipelineError> {
    let rows = dataset.ess_rows();
    fit_normalizer(&rows).map_err(|e| match e {
        FeatureError::InsufficientData { needed, got } => PipelineError::InsufficientData(format!(
            "{}: {got} snapshot rows, need at least {needed}",
            dataset.date
        )),
        other => other.into(),
    })
}

/// Fits on `fit_path` and returns the normalized feature rows of `eval_path`.
/// Either path may be a snapshot file or a tick file.
pub fn load_dataset(
    fit_path: &Path,
    eval_path: &Path,
    config: &ReplayConfig,
) -> Result<(NormalizerStats, Vec<Vec<f64>>), PipelineError> {
    let fit = load_day_snapshots(fit_path, config)?;
    let eval = load_day_snapshots(eval_path, config)?;
    if fit.instrument != eval.instrument {
        log::warn!("normalizer fitted on {} applied to {}", fit.instrument, eval.instrument);
    }
    let stats = fit_day(&fit)?;
    let rows = eval.rows.iter().map(|r| stats.normalize(&r.ess)).collect();
    Ok((stats, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header() -> TickHeader {
        TickHeader { instrument: "TST-USD".into(), tick_size: 0.5, date: "2024-01-02".into(), version: 1 }
    }

    fn two_sided(ts: i64) -> Vec<OrderEvent> {
        vec![OrderEvent::limit(Side::Bid, 200, 1.0, ts, 1), OrderEvent::limit(Side::Ask, 202, 1.0, ts, 2)]
    }

    #[test]
    fn empty_body_parses() {
        let tf = read_ticks("TST-USD,0.5,2024-01-02,1\n".as_bytes()).unwrap();
        assert_eq!(tf.header, header());
        assert!(tf.events.is_empty());
        let (day, stats) = replay(&tf, &ReplayConfig::default()).unwrap();
        assert!(day.is_empty());
        assert_eq!(stats.rows, 0);
    }

    #[test]
    fn parse_errors() {
        assert!(matches!(read_ticks("".as_bytes()), Err(PipelineError::MalformedHeader(_))));
        assert!(matches!(read_ticks("X,abc,2024,1\n".as_bytes()), Err(PipelineError::MalformedHeader(_))));
        assert!(matches!(read_ticks("X,0.5,2024,9\n".as_bytes()), Err(PipelineError::MalformedHeader(_))));
        let out_of_order = "X,0.5,d,1\n5,limit,bid,10,1,1\n4,limit,bid,10,1,2\n";
        assert!(matches!(
            read_ticks(out_of_order.as_bytes()),
            Err(PipelineError::OutOfOrderTimestamp { line: 3, timestamp: 4 })
        ));
        let unknown = "X,0.5,d,1\n5,modify,bid,10,1,1\n";
        assert!(matches!(read_ticks(unknown.as_bytes()), Err(PipelineError::UnknownEventKind { line: 2, .. })));
        let bad_qty = "X,0.5,d,1\n5,limit,bid,10,-1,1\n";
        assert!(matches!(read_ticks(bad_qty.as_bytes()), Err(PipelineError::MalformedRow { line: 2, .. })));
    }

    #[test]
    fn tick_round_trip() {
        let mut events = two_sided(10);
        events.push(OrderEvent::market(Side::Bid, 0.25, 20));
        events.push(OrderEvent::cancel(Side::Bid, 200, 1.0, 30, 1));
        let tf = TickFile { header: header(), events };
        let mut buf = Vec::new();
        write_ticks(&mut buf, &tf).unwrap();
        assert_eq!(read_ticks(buf.as_slice()).unwrap(), tf);
    }

    #[test]
    fn one_row_per_second_including_gaps() {
        let s = NANOS_PER_SECOND;
        let mut events = two_sided(0);
        for k in 1..10 {
            if k != 5 {
                events.push(OrderEvent::limit(Side::Bid, 199, 1.0, k * s + 1, 100 + k as u64));
            }
        }
        let tf = TickFile { header: header(), events };
        let (day, stats) = replay(&tf, &ReplayConfig::default()).unwrap();
        assert_eq!(stats.rows, 10);
        let rows = &day.dataset.rows;
        assert!(rows.windows(2).all(|w| w[1].timestamp_ns - w[0].timestamp_ns == s));
        // Second 5 had no events: identical book features, zero flow.
        let quiet = &rows[5];
        assert_eq!(quiet.ess[..crate::features::OFI], rows[4].ess[..crate::features::OFI]);
        assert!(quiet.ess[crate::features::OFI..crate::features::TFI].iter().all(|v| *v == 0.0));
        assert_eq!((quiet.buyer_notional, quiet.seller_notional), (0.0, 0.0));
        assert_eq!(quiet.midpoint, 100.5);
    }

    #[test]
    fn leading_one_sided_rows_are_skipped() {
        let s = NANOS_PER_SECOND;
        let events = vec![
            OrderEvent::limit(Side::Bid, 200, 1.0, 0, 1),
            OrderEvent::limit(Side::Ask, 202, 1.0, 2 * s, 2),
            OrderEvent::cancel(Side::Ask, 202, 1.0, 3 * s, 2),
        ];
        let (day, stats) = replay(&TickFile { header: header(), events }, &ReplayConfig::default()).unwrap();
        assert_eq!(stats.skipped_rows, 2);
        assert_eq!(day.len(), 2);
        // Ask side emptied: the last midpoint carries forward.
        assert_eq!(day.dataset.rows[1].midpoint, day.dataset.rows[0].midpoint);
    }

    #[test]
    fn unknown_cancel_is_counted_not_fatal() {
        let mut events = two_sided(0);
        events.push(OrderEvent::cancel(Side::Bid, 200, 1.0, 5, 77));
        let (_, stats) = replay(&TickFile { header: header(), events }, &ReplayConfig::default()).unwrap();
        assert_eq!(stats.rejected, 1);
    }

    #[test]
    fn snapshot_round_trip_is_byte_stable() {
        let mut events = two_sided(0);
        events.push(OrderEvent::market(Side::Ask, 0.3, NANOS_PER_SECOND / 2));
        events.push(OrderEvent::limit(Side::Ask, 203, 0.7, NANOS_PER_SECOND + 3, 9));
        let ds = replay_to_snapshots(&TickFile { header: header(), events }, &ReplayConfig::default()).unwrap();
        let mut a = Vec::new();
        write_snapshots(&mut a, &ds).unwrap();
        let back = read_snapshots(a.as_slice()).unwrap();
        assert_eq!(back, ds);
        let mut b = Vec::new();
        write_snapshots(&mut b, &back).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn snapshot_schema_checked() {
        assert!(matches!(read_snapshots("a,b\n".as_bytes()), Err(PipelineError::SchemaMismatch(_))));
        assert!(matches!(
            read_snapshots("#snapshot,2,X,0.5,d\n".as_bytes()),
            Err(PipelineError::SchemaMismatch(_))
        ));
        assert!(matches!(
            read_snapshots("#snapshot,1,X,0.5,d\ntimestamp_ns\n".as_bytes()),
            Err(PipelineError::SchemaMismatch(_))
        ));
    }

    #[test]
    fn missing_file_is_an_error() {
        let missing = Path::new("/nonexistent/day.csv");
        assert!(matches!(
            load_dataset(missing, missing, &ReplayConfig::default()),
            Err(PipelineError::Io { .. })
        ));
    }
}
