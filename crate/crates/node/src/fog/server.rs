//! TCP front ends of the fog: the binary edge port and the operator line port.

use std::io::{BufRead, BufReader, ErrorKind, Write};
use std::net::{Shutdown, SocketAddr, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::RecvTimeoutError;
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::Duration;

use ivise_core::operator_api::{ErrorCode, Reply, Request, OPERATOR_GREETING};
use ivise_core::protocol::{self, Message, ProtocolError, HEADER_LEN};
use ivise_core::CameraId;

use super::{lock, EdgeLink, FogError, FogNode, SessionEvent, NO_EDGES_IN_SCOPE};

const POLL: Duration = Duration::from_millis(50);
const WRITE_TIMEOUT: Duration = Duration::from_secs(2);

struct TcpLink(Mutex<TcpStream>);

impl EdgeLink for TcpLink {
    fn send(&self, message: &Message) -> Result<(), ProtocolError> {
        protocol::write_message(&mut *lock(&self.0), protocol::FOG_SENDER_ID, message).map(|_| ())
    }
}

#[derive(Default)]
struct Shared {
    shutdown: AtomicBool,
    /// Open sockets, shut down on stop so blocked readers return.
    streams: Mutex<Vec<TcpStream>>,
    workers: Mutex<Vec<JoinHandle<()>>>,
}

impl Shared {
    fn stopping(&self) -> bool {
        self.shutdown.load(Ordering::SeqCst)
    }

    fn track(&self, stream: &TcpStream) {
        if let Ok(s) = stream.try_clone() {
            lock(&self.streams).push(s);
        }
    }
}

pub struct FogServer {
    node: Arc<FogNode>,
    edge_addr: SocketAddr,
    operator_addr: SocketAddr,
    shared: Arc<Shared>,
    threads: Vec<JoinHandle<()>>,
}

impl FogServer {
    /// Binds both ports (port 0 picks a free one) and starts serving, plus a
    /// maintenance thread that expires queries and stale edges.
    pub fn start(node: Arc<FogNode>, edge_addr: &str, operator_addr: &str) -> std::io::Result<Self> {
        let edges = TcpListener::bind(edge_addr)?;
        let ops = TcpListener::bind(operator_addr)?;
        let (edge_addr, operator_addr) = (edges.local_addr()?, ops.local_addr()?);
        let shared = Arc::new(Shared::default());
        let mut threads = Vec::new();
        for (listener, operator) in [(edges, false), (ops, true)] {
            listener.set_nonblocking(true)?;
            let (node, shared) = (Arc::clone(&node), Arc::clone(&shared));
            threads.push(thread::spawn(move || accept_loop(listener, node, shared, operator)));
        }
        {
            let (node, shared) = (Arc::clone(&node), Arc::clone(&shared));
            let period = Duration::from_millis(node.settings().heartbeat_ms.clamp(1, 200));
            threads.push(thread::spawn(move || {
                while !shared.stopping() {
                    node.tick();
                    thread::sleep(period);
                }
            }));
        }
        log::info!("fog listening for edges on {edge_addr}, operators on {operator_addr}");
        Ok(Self { node, edge_addr, operator_addr, shared, threads })
    }

    pub fn node(&self) -> &Arc<FogNode> {
        &self.node
    }

    pub fn edge_addr(&self) -> SocketAddr {
        self.edge_addr
    }

    pub fn operator_addr(&self) -> SocketAddr {
        self.operator_addr
    }

    pub fn stop(mut self) {
        self.stop_threads();
    }

    fn stop_threads(&mut self) {
        self.shared.shutdown.store(true, Ordering::SeqCst);
        for s in lock(&self.shared.streams).drain(..) {
            let _ = s.shutdown(Shutdown::Both);
        }
        for t in self.threads.drain(..) {
            let _ = t.join();
        }
        let workers: Vec<_> = lock(&self.shared.workers).drain(..).collect();
        for t in workers {
            let _ = t.join();
        }
    }
}

impl Drop for FogServer {
    fn drop(&mut self) {
        self.stop_threads();
    }
}

fn accept_loop(listener: TcpListener, node: Arc<FogNode>, shared: Arc<Shared>, operator: bool) {
    while !shared.stopping() {
        match listener.accept() {
            Ok((stream, peer)) => {
                let _ = stream.set_nonblocking(false);
                shared.track(&stream);
                let (node, s) = (Arc::clone(&node), Arc::clone(&shared));
                let worker = thread::spawn(move || {
                    let result = if operator { serve_operator(stream, &node, &s) } else { serve_edge(stream, &node) };
                    if let Err(e) = result {
                        log::debug!("connection from {peer} closed: {e}");
                    }
                });
                let mut workers = lock(&shared.workers);
                workers.retain(|h| !h.is_finished());
                workers.push(worker);
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(POLL),
            Err(e) => {
                log::warn!("accept failed: {e}");
                thread::sleep(POLL);
            }
        }
    }
}

fn ingest_logged(node: &FogNode, sender: u64, msg: Message, bytes: usize) -> Result<Option<CameraId>, FogError> {
    match node.ingest(sender, msg, bytes) {
        Ok(o) => Ok(o.camera_id),
        Err(e @ FogError::UnknownEdge(_)) => Err(e),
        Err(e) => {
            log::warn!("rejected message: {e}");
            Ok(None)
        }
    }
}

/// An edge must open with a heartbeat from a registered sender.
fn serve_edge(mut stream: TcpStream, node: &FogNode) -> Result<(), String> {
    stream.set_nodelay(true).map_err(|e| e.to_string())?;
    let first = protocol::read_envelope(&mut stream).map_err(|e| e.to_string())?.ok_or("closed before hello")?;
    let bytes = HEADER_LEN + first.payload.len();
    let (sender, msg) = first.into_message().map_err(|e| e.to_string())?;
    if !matches!(msg, Message::Heartbeat(_)) {
        return Err("first message was not a heartbeat".into());
    }
    let camera = ingest_logged(node, sender, msg, bytes).map_err(|e| e.to_string())?.ok_or("bad hello")?;
    let writer = stream.try_clone().map_err(|e| e.to_string())?;
    writer.set_write_timeout(Some(WRITE_TIMEOUT)).map_err(|e| e.to_string())?;
    let conn = node.connect_edge(&camera, Arc::new(TcpLink(Mutex::new(writer)))).map_err(|e| e.to_string())?;
    let result = loop {
        let env = match protocol::read_envelope(&mut stream) {
            Ok(Some(env)) => env,
            Ok(None) => break Ok(()),
            Err(e) => break Err(e.to_string()),
        };
        let bytes = HEADER_LEN + env.payload.len();
        let (sender, msg) = match env.into_message() {
            Ok(m) => m,
            Err(e) => break Err(e.to_string()),
        };
        if let Err(e) = ingest_logged(node, sender, msg, bytes) {
            log::warn!("{camera}: {e}");
        }
    };
    node.disconnect_edge(&camera, conn);
    result
}

fn serve_operator(stream: TcpStream, node: &FogNode, shared: &Shared) -> Result<(), String> {
    let mut out = stream.try_clone().map_err(|e| e.to_string())?;
    writeln!(out, "{OPERATOR_GREETING}").map_err(|e| e.to_string())?;
    let mut send = |reply: &Reply| writeln!(out, "{reply}").and_then(|_| out.flush()).map_err(|e| e.to_string());
    let reader = BufReader::new(stream);
    for line in reader.lines() {
        let line = line.map_err(|e| e.to_string())?;
        if line.trim().is_empty() {
            continue;
        }
        let request = match Request::parse(&line) {
            Ok(r) => r,
            Err(e) => {
                send(&Reply::error(ErrorCode::BadRequest, e.0))?;
                continue;
            }
        };
        match request {
            Request::Submit { scope, text } => match node.submit_query(&text, scope) {
                Ok(receipt) => {
                    if let Some(w) = receipt.warning {
                        send(&Reply::Warn { code: NO_EDGES_IN_SCOPE.into(), message: w })?;
                    }
                    send(&Reply::Ok(receipt.query.id.to_string()))?;
                }
                Err(e) => send(&error_reply(&e))?,
            },
            Request::Cancel(id) => match node.cancel(id) {
                Ok(()) => send(&Reply::Ok(id.to_string()))?,
                Err(e) => send(&error_reply(&e))?,
            },
            Request::Stream(id) => match node.subscribe(id) {
                Ok(rx) => {
                    send(&Reply::Ok(id.to_string()))?;
                    loop {
                        match rx.recv_timeout(POLL) {
                            Ok(SessionEvent::Report(r)) => send(&Reply::Report(r))?,
                            Ok(SessionEvent::End(state)) => {
                                send(&Reply::End(state.name().into()))?;
                                break;
                            }
                            Err(RecvTimeoutError::Timeout) if !shared.stopping() => {}
                            Err(_) => return Ok(()),
                        }
                    }
                }
                Err(e) => send(&error_reply(&e))?,
            },
            Request::Offline { range, text } => match node.offline_query(&text, range) {
                Ok((_, reports)) => {
                    for r in reports {
                        send(&Reply::Report(Box::new(r)))?;
                    }
                    send(&Reply::End("complete".into()))?;
                }
                Err(e) => send(&error_reply(&e))?,
            },
            Request::Edges => {
                for e in node.edge_statuses() {
                    send(&Reply::Edge(e))?;
                }
                send(&Reply::End("edges".into()))?;
            }
            Request::Stats => {
                for (name, value) in node.stats() {
                    send(&Reply::Stat { name, value })?;
                }
                send(&Reply::End("stats".into()))?;
            }
            Request::Quit => {
                send(&Reply::Ok("bye".into()))?;
                return Ok(());
            }
        }
    }
    Ok(())
}

fn error_reply(e: &FogError) -> Reply {
    let code = match e {
        FogError::Query(q) => ErrorCode::from(q),
        FogError::UnknownQuery(_) => ErrorCode::UnknownQuery,
        _ => ErrorCode::Internal,
    };
    Reply::error(code, e.to_string())
}
