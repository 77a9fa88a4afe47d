// Render helpers. Everything returns an HTML string; only main.ts touches
// the document, which keeps these testable under plain node.

import type { GameState } from './state.js';
import type { MediaView, SessionView, TurnView } from './types.js';

export function escapeHtml(text: string): string {
  return text
    .replace(/&/g, '&amp;')
    .replace(/</g, '&lt;')
    .replace(/>/g, '&gt;')
    .replace(/"/g, '&quot;')
    .replace(/'/g, '&#39;');
}

export function renderTurn(turn: TurnView, characterName: string): string {
  if (turn.kind === 'cutscene') {
    return `<div class="scene"><div class="scene-rule"></div>` +
      `<p>${escapeHtml(turn.text)}</p></div>`;
  }
  const who = turn.kind === 'player' ? 'you' : characterName;
  return `<div class="msg ${turn.kind}">` +
    `<span class="who">${escapeHtml(who)}</span>` +
    `<p>${escapeHtml(turn.text)}</p></div>`;
}

export function renderHistory(session: SessionView): string {
  return session.history
    .map((turn) => renderTurn(turn, session.character_name))
    .join('');
}

export function renderReveals(reveals: string[]): string {
  return reveals
    .map((text) => `<div class="reveal">✦ ${escapeHtml(text)}</div>`)
    .join('');
}

export function renderGoalBanner(session: SessionView | null): string {
  if (!session) return '<div class="goal">connecting…</div>';
  if (session.status === 'completed') {
    return '<div class="goal done">story complete</div>';
  }
  if (session.status === 'abandoned') {
    return '<div class="goal done">session abandoned</div>';
  }
  const level = `level ${session.current_level + 1}/${session.final_level + 1}`;
  return `<div class="goal"><span class="level">${escapeHtml(level)}</span> ` +
    `${escapeHtml(session.goal_text)}</div>`;
}

export function renderFeedItem(item: MediaView): string {
  return `<figure class="post">` +
    `<img src="${escapeHtml(item.asset_url)}" alt="">` +
    `<figcaption>${escapeHtml(item.caption)}</figcaption></figure>`;
}

export function renderFeed(items: MediaView[]): string {
  if (items.length === 0) {
    return '<p class="feed-empty">nothing unlocked yet — keep talking.</p>';
  }
  return items.map(renderFeedItem).join('');
}

export function renderCutscene(state: GameState): string {
  if (!state.cutscene) return '';
  const goal = state.cutscene.completed
    ? '<p class="next-goal">the end.</p>'
    : `<p class="next-goal">new goal: ${escapeHtml(state.cutscene.nextGoal)}</p>`;
  return `<div class="overlay"><div class="cutscene">` +
    `<p>${escapeHtml(state.cutscene.text)}</p>${goal}` +
    `<button id="dismiss">continue</button></div></div>`;
}

export function renderError(error: string | null): string {
  return error ? `<div class="error">${escapeHtml(error)}</div>` : '';
}
