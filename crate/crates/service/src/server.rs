//! WebSocket host. One task owns the [`Session`] and steps it every 20 ms of
//! wall time; each connection gets its own task that talks to the session
//! loop through queues only.

use std::net::SocketAddr;
use std::time::Duration;

use axum::extract::ws::{Message, Utf8Bytes, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures_util::{SinkExt, StreamExt};
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot};
use tokio::time::MissedTickBehavior;

use dgui::runtime::{RuntimeError, FRAME_MS};
use dgui::servo::ServoError;
use dgui::sim::SceneConfig;

use crate::protocol::{decode, encode, ClientMessage, ServerMessage};
use crate::session::{ServeOptions, Session};

/// Broadcast backlog per observer before frames are dropped for it.
const BROADCAST_CAPACITY: usize = 64;
const DIRECT_CAPACITY: usize = 16;

#[derive(Debug, thiserror::Error)]
pub enum ServeError {
    #[error("cannot bind: {0}")]
    Bind(std::io::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Servo(#[from] ServoError),
    #[error("session loop fault: {0}")]
    Runtime(#[from] RuntimeError),
}

enum Inbound {
    Join {
        direct: mpsc::Sender<Utf8Bytes>,
        reply: oneshot::Sender<(u64, bool)>,
    },
    Leave {
        id: u64,
    },
    Message {
        id: u64,
        msg: ClientMessage,
    },
}

#[derive(Clone)]
struct AppState {
    inbound: mpsc::Sender<Inbound>,
    outbound: broadcast::Sender<Utf8Bytes>,
}

fn text(msg: &ServerMessage) -> Utf8Bytes {
    encode(msg).into()
}

struct Clients {
    next_id: u64,
    owner: Option<u64>,
    direct: Vec<(u64, mpsc::Sender<Utf8Bytes>)>,
}

impl Clients {
    fn tell(&self, id: u64, msg: &ServerMessage) {
        if let Some((_, tx)) = self.direct.iter().find(|(i, _)| *i == id) {
            // A client that cannot keep up with its direct queue loses the message.
            let _ = tx.try_send(text(msg));
        }
    }
}

async fn session_loop(
    mut session: Session,
    mut inbound: mpsc::Receiver<Inbound>,
    outbound: broadcast::Sender<Utf8Bytes>,
) -> Result<(), RuntimeError> {
    let mut clients = Clients {
        next_id: 1,
        owner: None,
        direct: Vec::new(),
    };
    let mut interval = tokio::time::interval(Duration::from_millis(FRAME_MS));
    interval.set_missed_tick_behavior(MissedTickBehavior::Delay);
    let publish = |msgs: Vec<ServerMessage>| {
        for m in &msgs {
            // No subscribers is fine.
            let _ = outbound.send(text(m));
        }
    };
    loop {
        tokio::select! {
            _ = interval.tick() => publish(session.tick()?),
            msg = inbound.recv() => match msg {
                None => return Ok(()),
                Some(Inbound::Join { direct, reply }) => {
                    let id = clients.next_id;
                    clients.next_id += 1;
                    let owner = clients.owner.is_none();
                    if owner {
                        clients.owner = Some(id);
                    }
                    clients.direct.push((id, direct));
                    let _ = reply.send((id, owner));
                }
                Some(Inbound::Leave { id }) => {
                    clients.direct.retain(|(i, _)| *i != id);
                    if clients.owner == Some(id) {
                        clients.owner = None;
                    }
                }
                Some(Inbound::Message { id, msg }) => {
                    if clients.owner != Some(id) {
                        clients.tell(id, &ServerMessage::Error {
                            message: "read-only observer: another client owns gaze and control".into(),
                        });
                        continue;
                    }
                    match msg {
                        ClientMessage::Gaze { gaze } => session.set_gaze(gaze),
                        ClientMessage::Control { cmd } => publish(session.control(cmd)),
                    }
                }
            }
        }
    }
}

async fn client(socket: WebSocket, app: AppState) {
    let mut outbound = app.outbound.subscribe();
    let (direct_tx, mut direct) = mpsc::channel(DIRECT_CAPACITY);
    let (reply_tx, reply) = oneshot::channel();
    if app
        .inbound
        .send(Inbound::Join {
            direct: direct_tx,
            reply: reply_tx,
        })
        .await
        .is_err()
    {
        return;
    }
    let Ok((id, gaze_owner)) = reply.await else {
        return;
    };
    let (mut sink, mut stream) = socket.split();
    let mut ok = sink
        .send(Message::Text(text(&ServerMessage::Welcome { gaze_owner })))
        .await
        .is_ok();
    while ok {
        ok = tokio::select! {
            incoming = stream.next() => match incoming {
                Some(Ok(Message::Text(t))) => match decode(t.as_str()) {
                    Ok(msg) => app.inbound.send(Inbound::Message { id, msg }).await.is_ok(),
                    Err(e) => sink
                        .send(Message::Text(text(&ServerMessage::Error { message: e.to_string() })))
                        .await
                        .is_ok(),
                },
                Some(Ok(Message::Binary(_))) => sink
                    .send(Message::Text(text(&ServerMessage::Error {
                        message: "binary frames are not part of the protocol".into(),
                    })))
                    .await
                    .is_ok(),
                Some(Ok(Message::Ping(_) | Message::Pong(_))) => true,
                Some(Ok(Message::Close(_)) | Err(_)) | None => false,
            },
            frame = outbound.recv() => match frame {
                Ok(t) => sink.send(Message::Text(t)).await.is_ok(),
                // Slow observer: skip what it missed.
                Err(broadcast::error::RecvError::Lagged(_)) => true,
                Err(broadcast::error::RecvError::Closed) => false,
            },
            Some(t) = direct.recv() => sink.send(Message::Text(t)).await.is_ok(),
        };
    }
    let _ = app.inbound.send(Inbound::Leave { id }).await;
}

async fn upgrade(ws: WebSocketUpgrade, State(app): State<AppState>) -> Response {
    ws.on_upgrade(move |socket| client(socket, app))
}

/// Runs the session on an already bound listener until the session loop
/// fails.
pub async fn serve_on(listener: TcpListener, scene: SceneConfig, options: ServeOptions) -> Result<(), ServeError> {
    let session = Session::new(scene, options)?;
    let (inbound_tx, inbound_rx) = mpsc::channel(256);
    let (outbound, _) = broadcast::channel(BROADCAST_CAPACITY);
    let app = AppState {
        inbound: inbound_tx,
        outbound: outbound.clone(),
    };
    let router = Router::new().route("/session", get(upgrade)).with_state(app);
    let (done_tx, done_rx) = oneshot::channel();
    let session_task = tokio::spawn(async move {
        let result = session_loop(session, inbound_rx, outbound).await;
        let _ = done_tx.send(());
        result
    });
    axum::serve(listener, router)
        .with_graceful_shutdown(async {
            let _ = done_rx.await;
        })
        .await?;
    match session_task.await {
        Ok(result) => Ok(result?),
        Err(e) => Err(std::io::Error::other(e).into()),
    }
}

pub async fn serve(addr: SocketAddr, scene: SceneConfig, options: ServeOptions) -> Result<(), ServeError> {
    let listener = TcpListener::bind(addr).await.map_err(ServeError::Bind)?;
    serve_on(listener, scene, options).await
}
