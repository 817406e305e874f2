//! Websocket session service: one ticker thread owns the session, one
//! handler thread owns the socket, and they talk over channels.

use std::io::ErrorKind;
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use crossbeam_channel::{unbounded, Receiver, RecvTimeoutError, Sender, TryRecvError};
use tungstenite::{Message, WebSocket};

use crate::protocol::{ErrorCode, Refusal, Sequencer, ServerMessage};
use crate::session::{Session, SessionConfig};

/// Environment variable overriding the ticker rate.
pub const TICK_HZ_VAR: &str = "FVA_TICK_HZ";

#[derive(Clone, Debug)]
pub struct ServeConfig {
    pub session: SessionConfig,
    /// Engine ticks per wall-clock second.
    pub tick_hz: f64,
    /// State frames per wall-clock second.
    pub snapshot_hz: f64,
    /// Where to write the replayable command log of the current session.
    pub command_log: Option<PathBuf>,
}

impl ServeConfig {
    pub fn new(session: SessionConfig) -> Self {
        ServeConfig {
            session,
            tick_hz: 1.0 / fva_core::engine::DEFAULT_DT,
            snapshot_hz: 20.0,
            command_log: None,
        }
    }
}

/// A running service; dropping it does not stop it, call [`Server::shutdown`].
pub struct Server {
    addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept: Option<JoinHandle<()>>,
}

impl Server {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn shutdown(mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }

    /// Blocks until the accept loop ends.
    pub fn wait(mut self) {
        if let Some(h) = self.accept.take() {
            let _ = h.join();
        }
    }
}

/// Starts serving on an already bound listener.
pub fn spawn(listener: TcpListener, config: ServeConfig) -> std::io::Result<Server> {
    // Fail early on configurations the engine refuses.
    Session::new(config.session.clone()).map_err(|e| std::io::Error::new(ErrorKind::InvalidInput, e))?;
    let addr = listener.local_addr()?;
    listener.set_nonblocking(true)?;
    let stop = Arc::new(AtomicBool::new(false));
    let flag = stop.clone();
    let accept = thread::spawn(move || accept_loop(listener, config, flag));
    Ok(Server {
        addr,
        stop,
        accept: Some(accept),
    })
}

fn accept_loop(listener: TcpListener, config: ServeConfig, stop: Arc<AtomicBool>) {
    let busy = Arc::new(AtomicBool::new(false));
    let mut workers = Vec::new();
    while !stop.load(Ordering::SeqCst) {
        match listener.accept() {
            Ok((stream, _)) => {
                if busy.swap(true, Ordering::SeqCst) {
                    thread::spawn(move || turn_away(stream));
                    continue;
                }
                let (config, stop, busy) = (config.clone(), stop.clone(), busy.clone());
                workers.push(thread::spawn(move || {
                    run_connection(stream, config, &stop);
                    busy.store(false, Ordering::SeqCst);
                }));
            }
            Err(e) if e.kind() == ErrorKind::WouldBlock => thread::sleep(Duration::from_millis(5)),
            Err(e) => {
                eprintln!("accept failed: {e}");
                thread::sleep(Duration::from_millis(50));
            }
        }
        workers.retain(|w: &JoinHandle<()>| !w.is_finished());
    }
    for w in workers {
        let _ = w.join();
    }
}

fn handshake(stream: TcpStream) -> Option<WebSocket<TcpStream>> {
    stream.set_nonblocking(false).ok()?;
    stream.set_nodelay(true).ok()?;
    tungstenite::accept(stream).ok()
}

fn turn_away(stream: TcpStream) {
    let Some(mut ws) = handshake(stream) else { return };
    let busy = ServerMessage::error(Refusal::new(ErrorCode::Busy, "another session is in progress"));
    let _ = ws.send(Message::text(Sequencer::default().encode(&busy)));
    let _ = ws.close(None);
    let _ = ws.flush();
}

fn run_connection(stream: TcpStream, config: ServeConfig, stop: &AtomicBool) {
    let Some(mut ws) = handshake(stream) else { return };
    if ws.get_ref().set_read_timeout(Some(Duration::from_millis(2))).is_err() {
        return;
    }
    let (in_tx, in_rx) = unbounded::<String>();
    let (out_tx, out_rx) = unbounded::<String>();
    let ticker = thread::spawn(move || ticker(config, in_rx, out_tx));
    'conn: while !stop.load(Ordering::SeqCst) {
        loop {
            match out_rx.try_recv() {
                Ok(text) => {
                    if ws.send(Message::text(text)).is_err() {
                        break 'conn;
                    }
                }
                Err(TryRecvError::Empty) => break,
                Err(TryRecvError::Disconnected) => break 'conn,
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => {
                if in_tx.send(text.to_string()).is_err() {
                    break;
                }
            }
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e)) if matches!(e.kind(), ErrorKind::WouldBlock | ErrorKind::TimedOut) => {}
            Err(_) => break,
        }
    }
    drop(in_tx);
    let _ = ws.close(None);
    let _ = ws.flush();
    let _ = ticker.join();
}

/// Owns the session for one connection. Runs until the handler hangs up.
fn ticker(config: ServeConfig, inbox: Receiver<String>, outbox: Sender<String>) {
    let mut session = match Session::new(config.session.clone()) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("session start failed: {e}");
            return;
        }
    };
    let mut seq = Sequencer::default();
    let send = |seq: &mut Sequencer, msgs: Vec<ServerMessage>| -> bool {
        msgs.iter().all(|m| outbox.send(seq.encode(m)).is_ok())
    };
    if !send(&mut seq, vec![session.state()]) {
        return;
    }
    let period = Duration::from_secs_f64(1.0 / config.tick_hz.max(1e-3));
    let snapshot_period = Duration::from_secs_f64(1.0 / config.snapshot_hz.max(1e-3));
    let mut next_tick = Instant::now() + period;
    let mut last_snapshot = Instant::now();
    let mut logged = 0usize;
    loop {
        match inbox.recv_timeout(next_tick.saturating_duration_since(Instant::now())) {
            Ok(text) => {
                let out = session.handle_text(&text);
                if !send(&mut seq, out) {
                    return;
                }
                continue;
            }
            Err(RecvTimeoutError::Disconnected) => break,
            Err(RecvTimeoutError::Timeout) => {}
        }
        next_tick += period;
        let mut out = session.step();
        if last_snapshot.elapsed() >= snapshot_period {
            last_snapshot = Instant::now();
            out.push(session.state());
        }
        if !send(&mut seq, out) {
            break;
        }
        let n = session.command_trace().commands.len();
        if n != logged {
            logged = n;
            write_command_log(&config, &session);
        }
    }
    write_command_log(&config, &session);
}

fn write_command_log(config: &ServeConfig, session: &Session) {
    let Some(path) = &config.command_log else { return };
    let text = serde_json::to_string_pretty(&session.command_trace()).expect("command trace serializes");
    if let Err(e) = std::fs::write(path, text + "\n") {
        eprintln!("cannot write command log {}: {e}", path.display());
    }
}
