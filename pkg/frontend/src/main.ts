// Entry point. This is the only module that touches the document: it wires
// the fetch client, the pure state transitions, and the render helpers
// together and owns the small amount of glue in between.

import { ApiError, makeClient } from './api.js';
import {
  GameState,
  applyFeed,
  applyMessage,
  applySession,
  beginSend,
  canSend,
  dismissCutscene,
  failSend,
  initialState,
} from './state.js';
import {
  clearSessionId,
  loadSessionId,
  saveSessionId,
} from './storage.js';
import {
  renderCutscene,
  renderError,
  renderFeed,
  renderGoalBanner,
  renderHistory,
  renderReveals,
} from './ui.js';
import type { SessionView } from './types.js';

const client = makeClient();

let game: GameState = initialState();
let corpusHash = '';

function el(id: string): HTMLElement {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing element #${id}`);
  return node;
}

function render(): void {
  el('goal').innerHTML = renderGoalBanner(game.session);
  el('history').innerHTML = game.session ? renderHistory(game.session) : '';
  el('reveals').innerHTML = renderReveals(game.reveals);
  el('feed').innerHTML = renderFeed(game.feed);
  el('overlay-root').innerHTML = renderCutscene(game);
  el('error').innerHTML = renderError(game.error);

  const input = el('message') as HTMLInputElement;
  const send = el('send') as HTMLButtonElement;
  input.disabled = !canSend(game);
  send.disabled = !canSend(game);

  const log = el('history');
  log.scrollTop = log.scrollHeight;
}

function update(next: GameState): void {
  game = next;
  render();
}

async function openSession(): Promise<SessionView> {
  const saved = loadSessionId(localStorage, corpusHash);
  if (saved) {
    try {
      return await client.getSession(saved);
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        clearSessionId(localStorage, corpusHash);
      } else {
        throw err;
      }
    }
  }
  const session = await client.createSession(corpusHash);
  saveSessionId(localStorage, corpusHash, session.session_id);
  return session;
}

async function refreshFeed(sessionId: string): Promise<void> {
  const feed = await client.getFeed(sessionId);
  update(applyFeed(game, feed.items));
}

async function sendMessage(): Promise<void> {
  const input = el('message') as HTMLInputElement;
  const text = input.value.trim();
  if (!text || !canSend(game) || !game.session) return;

  update(beginSend(game));
  input.value = '';
  try {
    const response = await client.sendMessage(game.session.session_id, text);
    update(applyMessage(game, response));
  } catch (err) {
    const message = err instanceof ApiError
      ? err.message
      : 'the connection dropped. try again?';
    update(failSend(game, message));
    input.value = text; // let the player retry without retyping
  }
  input.focus();
}

async function startOver(): Promise<void> {
  if (game.session && game.session.status === 'active') {
    try {
      await client.abandonSession(game.session.session_id);
    } catch {
      // a finished session can't be abandoned; starting over is still fine
    }
  }
  clearSessionId(localStorage, corpusHash);
  const session = await client.createSession(corpusHash);
  saveSessionId(localStorage, corpusHash, session.session_id);
  update({ ...initialState(), session });
}

async function boot(): Promise<void> {
  try {
    const health = await client.health();
    corpusHash = health.corpus_hash;
    const session = await openSession();
    update(applySession(game, session));
    await refreshFeed(session.session_id);
  } catch (err) {
    const message = err instanceof ApiError
      ? err.message
      : 'could not reach the server.';
    update(failSend(game, message));
    return;
  }

  el('composer').addEventListener('submit', (event) => {
    event.preventDefault();
    void sendMessage();
  });
  el('restart').addEventListener('click', () => void startOver());
  el('overlay-root').addEventListener('click', (event) => {
    const target = event.target as HTMLElement;
    if (target.id === 'dismiss') update(dismissCutscene(game));
  });

  (el('message') as HTMLInputElement).focus();
}

void boot();
