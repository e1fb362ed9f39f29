//! Distributed-mode server: accepts client connections, registers them by
//! HELLO, and drives the broadcast/collect phases of each round over TCP.
//!
//! Connections are served concurrently (one reader thread each), but all
//! state transitions flow through the single event loop owned by the round
//! engine's thread.

use crate::channel::ChannelReport;
use crate::error::{Error, Result};
use crate::fl::protocol::{read_message, write_message, Message};
use crate::fl::round::{ClientPool, ClientUpdate, PhaseTimings};
use crate::fl::DeviceId;
use crate::nerf::ModelParams;
use std::collections::BTreeMap;
use std::net::{Shutdown, TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::mpsc::{channel, Receiver, RecvTimeoutError, Sender};
use std::sync::Arc;
use std::time::{Duration, Instant};

enum Event {
    Hello {
        device_id: DeviceId,
        stream: TcpStream,
    },
    Update {
        device_id: DeviceId,
        conn: u64,
        msg: Message,
    },
    Disconnected {
        device_id: DeviceId,
        conn: u64,
    },
}

struct ClientConn {
    writer: TcpStream,
    conn: u64,
}

/// Server-side pool of TCP clients implementing [`ClientPool`].
pub struct TcpPool {
    n_clients: u32,
    layer_dims: Vec<(usize, usize)>,
    phase_timeout: Duration,
    events: Receiver<Event>,
    events_tx: Sender<Event>,
    clients: BTreeMap<DeviceId, ClientConn>,
    next_conn: u64,
    stop: Arc<AtomicBool>,
}

impl TcpPool {
    /// Bind `addr` and start accepting connections. Client ids outside
    /// `1..=n_clients` are rejected at HELLO.
    pub fn listen(
        addr: &str,
        n_clients: u32,
        layer_dims: Vec<(usize, usize)>,
        phase_timeout: Duration,
    ) -> Result<Self> {
        let listener = TcpListener::bind(addr)
            .map_err(|e| Error::Protocol(format!("bind {addr}: {e}")))?;
        listener
            .set_nonblocking(true)
            .map_err(|e| Error::Protocol(format!("listener setup: {e}")))?;
        let (tx, rx) = channel();
        let stop = Arc::new(AtomicBool::new(false));
        let accept_stop = stop.clone();
        let accept_tx = tx.clone();
        let max_id = n_clients;
        std::thread::spawn(move || accept_loop(listener, accept_tx, accept_stop, max_id));
        Ok(TcpPool {
            n_clients,
            layer_dims,
            phase_timeout,
            events: rx,
            events_tx: tx,
            clients: BTreeMap::new(),
            next_conn: 0,
            stop,
        })
    }

    /// Block until every configured client has said HELLO.
    pub fn wait_for_all_clients(&mut self, timeout: Duration) -> Result<()> {
        let deadline = Instant::now() + timeout;
        while self.clients.len() < self.n_clients as usize {
            let remaining = deadline
                .checked_duration_since(Instant::now())
                .ok_or_else(|| Error::Timeout {
                    round: 0,
                    phase: format!(
                        "registration ({}/{} clients connected)",
                        self.clients.len(),
                        self.n_clients
                    ),
                })?;
            match self.events.recv_timeout(remaining) {
                Ok(event) => self.handle_control_event(event),
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Protocol("accept loop stopped".into()))
                }
            }
        }
        log::info!("all {} clients registered", self.n_clients);
        Ok(())
    }

    fn handle_control_event(&mut self, event: Event) {
        match event {
            Event::Hello { device_id, stream } => self.register(device_id, stream),
            Event::Update { device_id, .. } => {
                log::warn!("dropping out-of-phase message from device {device_id}");
            }
            Event::Disconnected { device_id, conn } => self.note_disconnect(device_id, conn),
        }
    }

    fn register(&mut self, device_id: DeviceId, stream: TcpStream) {
        let conn = self.next_conn;
        self.next_conn += 1;
        if let Some(old) = self.clients.remove(&device_id) {
            log::warn!("device {device_id}: duplicate HELLO, replacing the previous connection");
            let _ = old.writer.shutdown(Shutdown::Both);
        }
        let reader = match stream.try_clone() {
            Ok(r) => r,
            Err(e) => {
                log::warn!("device {device_id}: could not clone stream: {e}");
                return;
            }
        };
        let tx = self.events_tx.clone();
        std::thread::spawn(move || reader_loop(reader, device_id, conn, tx));
        self.clients.insert(device_id, ClientConn { writer: stream, conn });
        log::info!("device {device_id} registered (connection {conn})");
    }

    fn note_disconnect(&mut self, device_id: DeviceId, conn: u64) {
        if self.clients.get(&device_id).is_some_and(|c| c.conn == conn) {
            log::warn!("device {device_id} disconnected");
            self.clients.remove(&device_id);
        }
    }

    fn attempt_round(
        &mut self,
        round: u32,
        selected: &[DeviceId],
        params: &ModelParams,
    ) -> Result<(Vec<ClientUpdate>, PhaseTimings)> {
        let wire_params: Vec<f32> = params.values.iter().map(|&v| v as f32).collect();

        let broadcast_start = Instant::now();
        for id in selected {
            let client = self.clients.get_mut(id).ok_or_else(|| Error::Timeout {
                round,
                phase: format!("broadcast (device {id} not connected)"),
            })?;
            write_message(
                &mut client.writer,
                &Message::Model {
                    round,
                    params: wire_params.clone(),
                },
            )
            .map_err(|e| Error::Protocol(format!("send MODEL to device {id}: {e}")))?;
        }
        let broadcast_seconds = broadcast_start.elapsed().as_secs_f64();

        let mut updates: BTreeMap<DeviceId, ClientUpdate> = BTreeMap::new();
        let wait_start = Instant::now();
        let mut first_update_at: Option<Instant> = None;
        let deadline = wait_start + self.phase_timeout;
        while updates.len() < selected.len() {
            let remaining = deadline
                .checked_duration_since(Instant::now())
                .ok_or_else(|| Error::Timeout {
                    round,
                    phase: format!("collect ({}/{} updates)", updates.len(), selected.len()),
                })?;
            let event = match self.events.recv_timeout(remaining) {
                Ok(e) => e,
                Err(RecvTimeoutError::Timeout) => continue,
                Err(RecvTimeoutError::Disconnected) => {
                    return Err(Error::Protocol("accept loop stopped".into()))
                }
            };
            match event {
                Event::Update { device_id, conn, msg } => {
                    if !self.clients.get(&device_id).is_some_and(|c| c.conn == conn) {
                        continue; // stale connection
                    }
                    match msg {
                        Message::Update {
                            device_id: claimed,
                            round: answered,
                            num_samples,
                            rssi,
                            rate_mbps_x100,
                            params: wire,
                        } => {
                            if claimed != device_id {
                                return Err(Error::Protocol(format!(
                                    "device {device_id} claimed id {claimed} in UPDATE"
                                )));
                            }
                            if answered != round || !selected.contains(&device_id) {
                                log::warn!(
                                    "ignoring update from device {device_id} for round {answered}"
                                );
                                continue;
                            }
                            first_update_at.get_or_insert_with(Instant::now);
                            let update = self.update_from_wire(
                                device_id,
                                round,
                                num_samples,
                                rssi,
                                rate_mbps_x100,
                                wire,
                            )?;
                            updates.insert(device_id, update);
                        }
                        other => {
                            return Err(Error::Protocol(format!(
                                "device {device_id} sent unexpected {other:?} during collect"
                            )))
                        }
                    }
                }
                other => self.handle_control_event(other),
            }
        }
        let now = Instant::now();
        let first = first_update_at.unwrap_or(now);
        Ok((
            updates.into_values().collect(),
            PhaseTimings {
                broadcast_seconds,
                train_seconds: first.duration_since(wait_start).as_secs_f64(),
                collect_seconds: now.duration_since(first).as_secs_f64(),
            },
        ))
    }

    fn update_from_wire(
        &self,
        device_id: DeviceId,
        round: u32,
        num_samples: u32,
        rssi: u8,
        rate_mbps_x100: u32,
        wire: Vec<f32>,
    ) -> Result<ClientUpdate> {
        use crate::channel::{rssi_to_quality, RssiSample};
        let expected = ModelParams::count_for(&self.layer_dims);
        if wire.len() != expected {
            return Err(Error::Protocol(format!(
                "device {device_id} sent {} parameters, model has {expected}",
                wire.len()
            )));
        }
        let rssi = RssiSample::new(rssi)
            .map_err(|_| Error::Protocol(format!("device {device_id} reported RSSI {rssi} > 100")))?;
        Ok(ClientUpdate {
            device_id,
            round,
            num_samples,
            params: ModelParams {
                layer_dims: self.layer_dims.clone(),
                values: wire.into_iter().map(f64::from).collect(),
            },
            report: ChannelReport {
                device_id,
                rssi,
                z: rssi_to_quality(rssi),
                rate: rate_mbps_x100 as f64 / 100.0,
            },
        })
    }
}

impl ClientPool for TcpPool {
    fn run_round(
        &mut self,
        round: u32,
        selected: &[DeviceId],
        params: &ModelParams,
        _reports: &[ChannelReport],
    ) -> Result<(Vec<ClientUpdate>, PhaseTimings)> {
        match self.attempt_round(round, selected, params) {
            Ok(out) => Ok(out),
            Err(Error::Timeout { .. }) => {
                log::warn!("round {round} timed out; retrying once with the same selection");
                self.attempt_round(round, selected, params)
            }
            Err(other) => Err(other),
        }
    }

    fn shutdown(&mut self) -> Result<()> {
        for (id, client) in &mut self.clients {
            if let Err(e) = write_message(&mut client.writer, &Message::Fin) {
                log::warn!("sending FIN to device {id}: {e}");
            }
        }
        self.stop.store(true, Ordering::SeqCst);
        Ok(())
    }
}

impl Drop for TcpPool {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
    }
}

fn accept_loop(listener: TcpListener, tx: Sender<Event>, stop: Arc<AtomicBool>, max_id: u32) {
    loop {
        if stop.load(Ordering::SeqCst) {
            return;
        }
        match listener.accept() {
            Ok((stream, peer)) => {
                let tx = tx.clone();
                std::thread::spawn(move || greet(stream, peer, tx, max_id));
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                std::thread::sleep(Duration::from_millis(20));
            }
            Err(e) => {
                log::warn!("accept failed: {e}");
                std::thread::sleep(Duration::from_millis(100));
            }
        }
    }
}

/// Expect HELLO as the first frame; hand the validated connection over.
fn greet(stream: TcpStream, peer: std::net::SocketAddr, tx: Sender<Event>, max_id: u32) {
    if stream.set_nonblocking(false).is_err() {
        return;
    }
    let mut reader = match stream.try_clone() {
        Ok(r) => r,
        Err(_) => return,
    };
    match read_message(&mut reader) {
        Ok(Some(Message::Hello { device_id })) => {
            if device_id.0 == 0 || device_id.0 > max_id {
                log::warn!("rejecting HELLO from {peer}: unconfigured device id {device_id}");
                let _ = stream.shutdown(Shutdown::Both);
                return;
            }
            let _ = tx.send(Event::Hello { device_id, stream });
        }
        Ok(Some(other)) => {
            log::warn!("rejecting {peer}: first frame was {other:?}, expected HELLO");
            let _ = stream.shutdown(Shutdown::Both);
        }
        Ok(None) => {}
        Err(e) => {
            log::warn!("rejecting {peer}: {e}");
            let _ = stream.shutdown(Shutdown::Both);
        }
    }
}

fn reader_loop(mut stream: TcpStream, device_id: DeviceId, conn: u64, tx: Sender<Event>) {
    loop {
        match read_message(&mut stream) {
            Ok(Some(msg)) => {
                if tx.send(Event::Update { device_id, conn, msg }).is_err() {
                    return;
                }
            }
            Ok(None) => {
                let _ = tx.send(Event::Disconnected { device_id, conn });
                return;
            }
            Err(e) => {
                log::warn!("device {device_id}: {e}");
                let _ = tx.send(Event::Disconnected { device_id, conn });
                return;
            }
        }
    }
}
