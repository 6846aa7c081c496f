// jsdom gaps
Element.prototype.scrollIntoView = Element.prototype.scrollIntoView ?? (() => {});
