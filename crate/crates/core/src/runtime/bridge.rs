//! TCP bridge so that other processes can publish to and read from the bus.
//!
//! Each line a client sends is either a message in the bus wire format or
//! `{"subscribe": "/channel"}`, after which messages on that channel are
//! written back to the client, one JSON object per line.

use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::thread::JoinHandle;

use serde::Deserialize;

use super::bus::Bus;
use super::value::BusMessage;

#[derive(Deserialize)]
struct SubscribeRequest {
    subscribe: String,
}

pub struct Bridge {
    addr: SocketAddr,
    handle: JoinHandle<()>,
}

impl Bridge {
    /// Binds `addr` (port 0 picks a free port) and serves clients until the
    /// bus closes.
    pub fn start(bus: Bus, addr: &str) -> std::io::Result<Bridge> {
        let listener = TcpListener::bind(addr)?;
        listener.set_nonblocking(true)?;
        let addr = listener.local_addr()?;
        let handle = std::thread::spawn(move || {
            while !bus.is_closed() {
                match listener.accept() {
                    Ok((stream, peer)) => {
                        log::info!("bridge client {peer} connected");
                        let bus = bus.clone();
                        std::thread::spawn(move || serve(bus, stream));
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(std::time::Duration::from_millis(20));
                    }
                    Err(e) => {
                        log::warn!("bridge accept failed: {e}");
                        break;
                    }
                }
            }
        });
        Ok(Bridge { addr, handle })
    }

    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    pub fn join(self) {
        let _ = self.handle.join();
    }
}

fn serve(bus: Bus, stream: TcpStream) {
    let _ = stream.set_nonblocking(false);
    let reader = match stream.try_clone() {
        Ok(s) => BufReader::new(s),
        Err(e) => {
            log::warn!("bridge: {e}");
            return;
        }
    };
    for line in reader.lines() {
        let Ok(line) = line else { break };
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Ok(req) = serde_json::from_str::<SubscribeRequest>(line) {
            match (bus.subscribe(&req.subscribe), stream.try_clone()) {
                (Ok(sub), Ok(mut out)) => {
                    std::thread::spawn(move || {
                        while let Some(msg) = sub.recv() {
                            if writeln!(out, "{}", msg.to_json_line()).is_err() {
                                break;
                            }
                        }
                    });
                }
                (Err(e), _) => log::warn!("bridge: {e}"),
                (_, Err(e)) => log::warn!("bridge: {e}"),
            }
            continue;
        }
        match serde_json::from_str::<BusMessage>(line) {
            Ok(msg) => {
                if let Err(e) = bus.publish(msg) {
                    log::warn!("bridge: {e}");
                }
            }
            Err(e) => log::warn!("bridge: malformed line: {e}"),
        }
    }
}
